#pragma once

// Checkpoint container:
//   "YFTAGCK\0"            8-byte magic
//   uint32 LE              format version
//   uint64 LE              header length in bytes
//   header                 JSON: arch text, input geometry, head, train and
//                          augment config, epoch, generator state, and the
//                          tensor directory {name, shape, offset, count}
//   payload                raw little-endian float32 tensors in directory
//                          order; offsets are relative to the payload start

#include <cstdint>
#include <string>
#include <vector>

#include "yftag/network.hpp"
#include "yftag/train.hpp"

namespace yftag::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

struct TensorEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;  // bytes
  std::uint64_t count = 0;   // elements
};

struct TrainingState {
  net::TrainConfig config;
  train::AugmentConfig augment;
  int epoch = 0;  // completed epochs
  std::string rng_state;
};

struct Header {
  std::uint32_t version = kFormatVersion;
  std::string arch;  // architecture file text
  arch::Geometry input;
  HeadConfig head;
  TrainingState state;
  std::vector<TensorEntry> tensors;
};

void save(const std::string& path, net::Network& network,
          const TrainingState& state);

Header read_header(const std::string& path);

struct Loaded {
  net::Network network;
  TrainingState state;
};

// Rebuilds the network from the stored architecture and restores every
// tensor. Throws if the directory does not match the rebuilt network.
Loaded load(const std::string& path);

}  // namespace yftag::ckpt
