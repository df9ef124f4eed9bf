#pragma once

#include <cstdint>
#include <vector>

namespace xdv {

// 8-bit interleaved RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) { return pixels[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[index(x, y, c)]; }
  bool empty() const noexcept { return width <= 0 || height <= 0; }

  bool operator==(const RgbImage&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
            static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c);
  }
};

// Single-channel real-valued plane used for intermediate processing.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

// BT.601 luma, unrounded.
Plane to_luma(const RgbImage& image);

Plane channel(const RgbImage& image, int c);

std::uint8_t clamp_to_byte(double v) noexcept;

}  // namespace xdv
