#pragma once

// Architecture notation for linear-chain convolutional networks.
//
// A stage is a '+'-joined chain of blocks. Conv blocks are written
// "(s,n)" for an s×s filter with n outputs, or "(1x3+3x1,n)" for a
// factored pair applied in the written order, optionally followed by
// "/stride" and "xrepeat". A bare "m/k" is a max-pool of window m and
// stride k. Stages are separated by ';', and a file prefixes the stages
// with "name:".
//
//   YFNet-D: (7,64)/2+3/3; (1x3+3x1,128)x2+2/2; ...

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "yftag/head_config.hpp"

namespace yftag::arch {

struct SquareFilter {
  int size = 1;
  friend bool operator==(const SquareFilter&, const SquareFilter&) = default;
};

// Two convolutions applied back to back, first then second.
struct FactoredFilter {
  int first_h = 1;
  int first_w = 1;
  int second_h = 1;
  int second_w = 1;
  friend bool operator==(const FactoredFilter&,
                         const FactoredFilter&) = default;
};

using FilterShape = std::variant<SquareFilter, FactoredFilter>;

struct ConvBlock {
  FilterShape filter;
  int channels = 1;
  int stride = 1;
  // Repeated layers each get their own weights.
  int repeat = 1;
  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

struct PoolBlock {
  int window = 1;
  int stride = 1;
  friend bool operator==(const PoolBlock&, const PoolBlock&) = default;
};

using Block = std::variant<ConvBlock, PoolBlock>;
using Stage = std::vector<Block>;

struct ArchSpec {
  std::string name;
  std::vector<Stage> stages;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// Parses the stage rows ("stage;stage;..."). Throws ParseError carrying
// the character offset of the first offending token.
ArchSpec parse_arch(std::string_view name, std::string_view text);

// Parses a whole architecture file: "name: stage; stage; ...".
ArchSpec parse_arch_file(std::string_view contents);

// Canonical stage text. Defaults (/1, x1) are elided and stages are
// joined by "; ".
std::string render_arch(const ArchSpec& spec);

// "name: <render_arch>\n", the on-disk form.
std::string render_arch_file(const ArchSpec& spec);

ArchSpec load_arch_file(const std::string& path);

// Throws ParseError(offset 0) when `spec` violates an ArchSpec invariant.
void validate(const ArchSpec& spec);

// Number of conv layers the block expands to (factored blocks count 2
// per repeat).
int conv_layer_count(const ConvBlock& block);

// ---------------------------------------------------------------------------
// Layer expansion

struct Geometry {
  int height = 0;
  int width = 0;
  int channels = 0;
  friend bool operator==(const Geometry&, const Geometry&) = default;
};

// Parses "221x221x3".
Geometry parse_geometry(std::string_view text);

enum class LayerKind { conv, pool, spp, fc, batchnorm, relu, dropout };

std::string_view to_string(LayerKind kind);

struct Padding {
  int top = 0;
  int bottom = 0;
  int left = 0;
  int right = 0;
  friend bool operator==(const Padding&, const Padding&) = default;
};

struct Layer {
  LayerKind kind = LayerKind::conv;
  // 1-based stage index; 0 for head layers.
  int stage = 0;
  int in_channels = 0;
  int out_channels = 0;
  int filter_h = 0;
  int filter_w = 0;
  int stride = 1;
  Padding padding;
  int in_h = 0;
  int in_w = 0;
  int out_h = 0;
  int out_w = 0;
  double dropout_rate = 0.0;
};

struct LayerPlan {
  ArchSpec spec;
  Geometry input;
  HeadConfig head;
  std::vector<Layer> layers;
  // Geometry after the last block of each stage.
  std::vector<Geometry> stage_outputs;
};

// Resolves every layer's channels, padding and spatial size.
//
// The first conv of the network is unpadded; every later conv is padded
// to keep its spatial size (SAME), and pooling keeps only complete
// windows. Each conv and hidden fc is followed by batchnorm and relu,
// hidden fcs additionally by dropout. The logits fc stands alone.
LayerPlan expand_layers(const ArchSpec& spec, const Geometry& input,
                        const HeadConfig& head);

}  // namespace yftag::arch
