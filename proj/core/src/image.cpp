#include "yftag/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "yftag/error.hpp"

namespace yftag {

Image make_image(int channels, int height, int width, std::uint8_t fill) {
  if (channels < 1 || height < 1 || width < 1) {
    throw ShapeError("image dimensions must be positive");
  }
  Image im;
  im.channels = channels;
  im.height = height;
  im.width = width;
  im.pixels.assign(std::size_t(channels) * height * width, fill);
  return im;
}

namespace {

int read_header_int(std::istream& in, const std::string& path) {
  int c = in.peek();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int v = 0;
  if (!(in >> v) || v <= 0) throw Error("bad PNM header in " + path);
  return v;
}

}  // namespace

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read image " + path);
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' ||
      (magic[1] != '6' && magic[1] != '5')) {
    throw Error("not a binary PPM/PGM file: " + path);
  }
  const int channels = magic[1] == '6' ? 3 : 1;
  const int width = read_header_int(in, path);
  const int height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (maxval != 255) throw Error("only 8-bit PNM is supported: " + path);
  in.get();
  std::vector<std::uint8_t> interleaved(std::size_t(width) * height * channels);
  if (!in.read(reinterpret_cast<char*>(interleaved.data()),
               static_cast<std::streamsize>(interleaved.size()))) {
    throw Error("truncated image data in " + path);
  }
  Image im = make_image(channels, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        im.at(c, y, x) = interleaved[(std::size_t(y) * width + x) * channels + c];
      }
    }
  }
  return im;
}

void write_pnm(const std::string& path, const Image& image) {
  if (image.channels != 3 && image.channels != 1) {
    throw Error("PNM output needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image " + path);
  out << (image.channels == 3 ? "P6" : "P5") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  std::vector<std::uint8_t> interleaved(image.pixels.size());
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        interleaved[(std::size_t(y) * image.width + x) * image.channels + c] =
            image.at(c, y, x);
      }
    }
  }
  out.write(reinterpret_cast<const char*>(interleaved.data()),
            static_cast<std::streamsize>(interleaved.size()));
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (image.height == height && image.width == width) return image;
  Image out = make_image(image.channels, height, width);
  const double sy = double(image.height) / height;
  const double sx = double(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0,
                                 double(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                   double(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double v =
            (1 - wy) * ((1 - wx) * image.at(c, y0, x0) + wx * image.at(c, y0, x1)) +
            wy * ((1 - wx) * image.at(c, y1, x0) + wx * image.at(c, y1, x1));
        out.at(c, y, x) = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return out;
}

Tensor image_to_tensor(const Image& image) {
  Tensor t({image.channels, image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    t[i] = image.pixels[i] / 255.0f - 0.5f;
  }
  return t;
}

}  // namespace yftag
