#include "xdv/raster.hpp"

#include <algorithm>
#include <cmath>

namespace xdv {

RgbImage::RgbImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

Plane to_luma(const RgbImage& image) {
  Plane out(image.width, image.height);
  const std::size_t n = out.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto* px = &image.pixels[i * 3];
    out.values[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }
  return out;
}

Plane channel(const RgbImage& image, int c) {
  Plane out(image.width, image.height);
  const std::size_t n = out.values.size();
  for (std::size_t i = 0; i < n; ++i) out.values[i] = image.pixels[i * 3 + c];
  return out;
}

std::uint8_t clamp_to_byte(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace xdv
