#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "yftag/tensor.hpp"

namespace yftag {

// 8-bit planar (CHW) image.
struct Image {
  int channels = 3;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int c, int y, int x) {
    return pixels[(std::size_t(c) * height + y) * width + x];
  }
  std::uint8_t at(int c, int y, int x) const {
    return pixels[(std::size_t(c) * height + y) * width + x];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

Image make_image(int channels, int height, int width, std::uint8_t fill = 0);

// Binary PPM (P6, 3 channels) and PGM (P5, 1 channel), maxval 255.
Image read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Image& image);

// Bilinear resample to height×width.
Image resize_bilinear(const Image& image, int height, int width);

// [C,H,W] floats in [-0.5, 0.5].
Tensor image_to_tensor(const Image& image);

}  // namespace yftag
