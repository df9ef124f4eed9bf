#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xdv/dataset.hpp"
#include "xdv/raster.hpp"

namespace xdv {

inline constexpr int kAlignedSize = 224;
inline constexpr double kRoiExpansion = 0.22;

// A geometrically normalized 224x224 face crop.
struct AlignedFace {
  RgbImage pixels;
  std::string source_id;
  std::string enhancement = "none";
};

// Maps a source-image point into output (aligned) coordinates.
struct AffineTransform {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  Point apply(Point p) const noexcept { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  AffineTransform inverse() const;
};

struct GeometryPlan {
  Rect expanded_roi;       // after expansion and clamping, in rotated-image coordinates
  Point pivot;             // eye midpoint
  double angle_rad = 0.0;  // eye-line angle; the image is rotated by -angle_rad
  AffineTransform source_to_output;
};

GeometryPlan plan_geometry(const FaceSample& sample);

// Expand ROI by 22% per side, rotate about the eye midpoint so the eyes are
// level, crop, and resample to 224x224 bilinearly.
AlignedFace normalize_geometry(const FaceSample& sample);

struct RetinexParams {
  double sigma = 100.0;
  double low_percentile = 1.0;
  double high_percentile = 99.0;
};

struct AceParams {
  double slope = 5.0;
  double limit = 1.0;       // r saturates at +-limit
  int neighbor_stride = 2;  // neighbor set = pixels on a stride x stride lattice
};

struct ClaheParams {
  int tiles_x = 8;
  int tiles_y = 8;
  double clip_limit = 2.0;  // <= 0 or infinity disables clipping
};

enum class EnhancementKind { None, Retinex, Ace, Clahe };

struct EnhancementMethod {
  EnhancementKind kind = EnhancementKind::None;
  RetinexParams retinex;
  AceParams ace;
  ClaheParams clahe;

  std::string_view tag() const;
};

std::string_view enhancement_tag(EnhancementKind kind);

// Case-insensitive: none | retinex | ace | clahe, with default parameters.
EnhancementMethod enhancement_of(std::string_view tag);

AlignedFace enhance(const AlignedFace& face, const EnhancementMethod& method);

// The individual photometric operators, usable on any RGB raster.
RgbImage apply_retinex(const RgbImage& image, const RetinexParams& params);
RgbImage apply_ace(const RgbImage& image, const AceParams& params);
RgbImage apply_clahe(const RgbImage& image, const ClaheParams& params);

// CLAHE on one 8-bit plane (row-major, width x height).
std::vector<std::uint8_t> clahe_plane(std::span<const std::uint8_t> plane, int width, int height,
                                      const ClaheParams& params);

}  // namespace xdv
