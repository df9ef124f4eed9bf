#include <algorithm>
#include <cmath>

#include "xdv/error.hpp"
#include "xdv/imaging.hpp"

namespace xdv {

AffineTransform AffineTransform::inverse() const {
  const double det = a * d - b * c;
  if (det == 0.0) fail(ErrorKind::InvalidArgument, "singular affine transform");
  AffineTransform inv;
  inv.a = d / det;
  inv.b = -b / det;
  inv.c = -c / det;
  inv.d = a / det;
  inv.tx = -(inv.a * tx + inv.b * ty);
  inv.ty = -(inv.c * tx + inv.d * ty);
  return inv;
}

GeometryPlan plan_geometry(const FaceSample& sample) {
  const Rect roi = validate_sample(sample);
  const double ex = sample.right_eye.x - sample.left_eye.x;
  const double ey = sample.right_eye.y - sample.left_eye.y;
  if (std::hypot(ex, ey) == 0.0) fail(ErrorKind::InvalidArgument, sample.key() + ": coincident eye centers");

  GeometryPlan plan;
  plan.angle_rad = std::atan2(ey, ex);
  plan.pivot = {(sample.left_eye.x + sample.right_eye.x) / 2.0, (sample.left_eye.y + sample.right_eye.y) / 2.0};

  const double w = static_cast<double>(sample.image.width);
  const double h = static_cast<double>(sample.image.height);
  const double x0 = std::max(0.0, roi.x - kRoiExpansion * roi.w);
  const double y0 = std::max(0.0, roi.y - kRoiExpansion * roi.h);
  const double x1 = std::min(w, roi.x + roi.w * (1.0 + kRoiExpansion));
  const double y1 = std::min(h, roi.y + roi.h * (1.0 + kRoiExpansion));
  plan.expanded_roi = {x0, y0, x1 - x0, y1 - y0};
  if (!(plan.expanded_roi.w > 0.0) || !(plan.expanded_roi.h > 0.0))
    fail(ErrorKind::DegenerateRoi, sample.key() + ": expanded ROI has zero area");

  // Rotation by -angle about the pivot, then the crop-and-scale to 224x224.
  // Pixel centers sit at integer coordinates in both spaces.
  const double cs = std::cos(plan.angle_rad), sn = std::sin(plan.angle_rad);
  const double sx = kAlignedSize / plan.expanded_roi.w;
  const double sy = kAlignedSize / plan.expanded_roi.h;
  const Point p = plan.pivot;
  auto& t = plan.source_to_output;
  t.a = sx * cs;
  t.b = sx * sn;
  t.tx = sx * (p.x - cs * p.x - sn * p.y - x0 + 0.5) - 0.5;
  t.c = -sy * sn;
  t.d = sy * cs;
  t.ty = sy * (p.y + sn * p.x - cs * p.y - y0 + 0.5) - 0.5;
  return plan;
}

AlignedFace normalize_geometry(const FaceSample& sample) {
  const GeometryPlan plan = plan_geometry(sample);
  const AffineTransform back = plan.source_to_output.inverse();
  const RgbImage& src = sample.image;

  AlignedFace face;
  face.source_id = sample.key();
  face.pixels = RgbImage(kAlignedSize, kAlignedSize);
  const double max_x = src.width - 1.0, max_y = src.height - 1.0;
  for (int v = 0; v < kAlignedSize; ++v) {
    for (int u = 0; u < kAlignedSize; ++u) {
      const Point q = back.apply({static_cast<double>(u), static_cast<double>(v)});
      const double fx = std::clamp(q.x, 0.0, max_x);
      const double fy = std::clamp(q.y, 0.0, max_y);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double wx = fx - x0, wy = fy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1.0 - wx) * src.at(x0, y0, ch) + wx * src.at(x1, y0, ch);
        const double bottom = (1.0 - wx) * src.at(x0, y1, ch) + wx * src.at(x1, y1, ch);
        face.pixels.at(u, v, ch) = clamp_to_byte((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return face;
}

}  // namespace xdv
