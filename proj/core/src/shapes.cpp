#include "yftag/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "yftag/error.hpp"
#include "yftag/network.hpp"

namespace yftag::data {
namespace {

constexpr int kMargin = 8;

double unit(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

int between(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(net::uniform_index(rng, std::uint64_t(hi - lo + 1)));
}

bool inside(int cls, double dx, double dy, double r) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (cls) {
    case 0:  // circle
      return dx * dx + dy * dy <= r * r;
    case 1: {  // ring
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.3 * r * r;
    }
    case 2:  // square
      return ax <= 0.85 * r && ay <= 0.85 * r;
    case 3:  // diamond
      return ax + ay <= r;
    case 4:  // triangle, apex up
      return dy >= -r && dy <= r && ax <= (dy + r) / 2;
    case 5:  // plus
      return (ax <= r / 3 && ay <= r) || (ay <= r / 3 && ax <= r);
    case 6:  // diagonal cross
      return std::max(ax, ay) <= r && std::abs(ax - ay) <= 0.3 * r;
    default:  // horizontal bar
      return ax <= r && ay <= r / 4;
  }
}

struct Placed {
  int cls;
  double cx, cy, r;
};

}  // namespace

const std::array<std::string_view, kShapeClasses>& shape_class_names() {
  static const std::array<std::string_view, kShapeClasses> names{
      "circle", "ring", "square", "diamond", "triangle", "plus", "cross", "bar"};
  return names;
}

Dataset generate_shapes(const ShapesConfig& config) {
  if (config.count < 0) throw Error("shapes: count must be >= 0");
  if (config.min_shapes < 1 || config.max_shapes < config.min_shapes ||
      config.max_shapes > kShapeClasses) {
    throw Error("shapes: need 1 <= min_shapes <= max_shapes <= 8");
  }
  if (!(config.min_radius >= 3 && config.max_radius >= config.min_radius &&
        2 * config.max_radius + 1 <= config.size - 2 * kMargin)) {
    throw Error("shapes: radius range does not fit the image");
  }
  Dataset ds;
  for (auto name : shape_class_names()) ds.class_names.emplace_back(name);
  std::mt19937_64 rng(config.seed);
  const int s = config.size;
  const double lo = kMargin, hi = s - kMargin;
  for (int n = 0; n < config.count; ++n) {
    const int want = between(rng, config.min_shapes, config.max_shapes);
    std::array<int, kShapeClasses> classes{};
    for (int i = 0; i < kShapeClasses; ++i) classes[i] = i;
    for (int i = 0; i < want; ++i) {
      std::swap(classes[i],
                classes[i + net::uniform_index(rng, kShapeClasses - i)]);
    }
    std::vector<Placed> placed;
    for (int i = 0; i < want; ++i) {
      // Retry positions until the shape clears the others.
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double r = config.min_radius +
                         (config.max_radius - config.min_radius) * unit(rng);
        const double cx = lo + r + (hi - lo - 2 * r - 1) * unit(rng);
        const double cy = lo + r + (hi - lo - 2 * r - 1) * unit(rng);
        bool clear = true;
        for (const auto& p : placed) {
          const double d = std::hypot(cx - p.cx, cy - p.cy);
          if (d < r + p.r + 2) clear = false;
        }
        if (clear) {
          placed.push_back({classes[i], cx, cy, r});
          break;
        }
      }
    }
    Image img = make_image(3, s, s);
    const int base = between(rng, 0, 60);
    for (auto& px : img.pixels) px = std::uint8_t(base + between(rng, 0, 20));
    Example e;
    for (const auto& p : placed) {
      std::array<int, 3> colour;
      for (auto& c : colour) c = between(rng, 110, 255);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          if (!inside(p.cls, x + 0.5 - p.cx, y + 0.5 - p.cy, p.r)) continue;
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = std::uint8_t(colour[c]);
        }
      }
      e.positives.push_back(p.cls);
    }
    std::sort(e.positives.begin(), e.positives.end());
    char id[16];
    std::snprintf(id, sizeof id, "s%06d", n);
    e.id = id;
    e.image = std::move(img);
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

}  // namespace yftag::data
