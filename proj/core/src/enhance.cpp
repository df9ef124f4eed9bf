#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>

#include "xdv/error.hpp"
#include "xdv/imaging.hpp"

namespace xdv {
namespace {

// Separable Gaussian blur with replicated borders.
Plane gaussian_blur(const Plane& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double k = std::exp(-0.5 * (i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = k;
    total += k;
  }
  for (auto& k : kernel) k /= total;

  Plane tmp(in.width, in.height), out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * in.at(std::clamp(x + i, 0, in.width - 1), y);
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(x, std::clamp(y + i, 0, in.height - 1));
      out.at(x, y) = acc;
    }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  if (hi == lo) return v_lo;
  const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
}

// Linear map of [lo, hi] onto [0, 255]; a collapsed range maps to mid-gray.
void stretch_into(RgbImage& out, int c, const std::vector<double>& values, double lo, double hi) {
  const bool flat = !(hi - lo > 1e-9);
  for (std::size_t i = 0; i < values.size(); ++i)
    out.pixels[i * 3 + static_cast<std::size_t>(c)] =
        flat ? std::uint8_t{128} : clamp_to_byte(255.0 * (values[i] - lo) / (hi - lo));
}

}  // namespace

std::string_view enhancement_tag(EnhancementKind kind) {
  switch (kind) {
    case EnhancementKind::None: return "none";
    case EnhancementKind::Retinex: return "retinex";
    case EnhancementKind::Ace: return "ace";
    case EnhancementKind::Clahe: return "clahe";
  }
  return "none";
}

std::string_view EnhancementMethod::tag() const { return enhancement_tag(kind); }

EnhancementMethod enhancement_of(std::string_view tag) {
  std::string lower(tag);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  EnhancementMethod m;
  if (lower == "none") m.kind = EnhancementKind::None;
  else if (lower == "retinex") m.kind = EnhancementKind::Retinex;
  else if (lower == "ace") m.kind = EnhancementKind::Ace;
  else if (lower == "clahe") m.kind = EnhancementKind::Clahe;
  else fail(ErrorKind::InvalidArgument, "unknown enhancement '" + std::string(tag) + "' (valid: none, retinex, ace, clahe)");
  return m;
}

// Single-scale retinex per channel: log(I+1) - log(G*I + 1), then a
// percentile-clipped linear stretch.
RgbImage apply_retinex(const RgbImage& image, const RetinexParams& params) {
  if (!(params.sigma > 0.0) || !(params.low_percentile < params.high_percentile))
    fail(ErrorKind::InvalidArgument, "retinex: sigma must be positive and percentiles ordered");
  RgbImage out(image.width, image.height);
  for (int c = 0; c < 3; ++c) {
    const Plane in = channel(image, c);
    const Plane surround = gaussian_blur(in, params.sigma);
    std::vector<double> r(in.values.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] = std::log(in.values[i] + 1.0) - std::log(surround.values[i] + 1.0);
    const double lo = percentile(r, params.low_percentile);
    const double hi = percentile(r, params.high_percentile);
    stretch_into(out, c, r, lo, hi);
  }
  return out;
}

// Automatic color equalization. Chromatic/spatial stage
//   R(p) = sum_{q != p} r(I(p) - I(q)) / |p - q|  /  sum_{q != p} 1 / |p - q|
// with r(t) = clamp(slope * t, -limit, limit) on intensities scaled to [0,1],
// over a lattice-subsampled neighbor set; then a per-channel white-patch
// (min-max) stretch to [0,255].
RgbImage apply_ace(const RgbImage& image, const AceParams& params) {
  if (!(params.slope > 0.0) || !(params.limit > 0.0) || params.neighbor_stride < 1)
    fail(ErrorKind::InvalidArgument, "ace: slope, limit and stride must be positive");
  const int w = image.width, h = image.height, s = params.neighbor_stride;
  const int nkx = (w + s - 1) / s, nky = (h + s - 1) / s;
  const std::size_t row_len = static_cast<std::size_t>(2 * nkx);

  std::array<std::vector<float>, 3> lattice;
  for (auto& l : lattice) l.resize(static_cast<std::size_t>(nkx) * nky);
  for (int ky = 0; ky < nky; ++ky)
    for (int kx = 0; kx < nkx; ++kx)
      for (int c = 0; c < 3; ++c)
        lattice[c][static_cast<std::size_t>(ky) * nkx + kx] = image.at(kx * s, ky * s, c) / 255.0f;

  // weights[par][|dy|][j + nkx] = 1/|(s*j - par, dy)|, zero at the origin.
  std::vector<float> weights(static_cast<std::size_t>(s) * h * row_len, 0.0f);
  for (int par = 0; par < s; ++par)
    for (int dy = 0; dy < h; ++dy)
      for (int j = -nkx; j < nkx; ++j) {
        const double dx = static_cast<double>(s) * j - par;
        const double dist = std::hypot(dx, static_cast<double>(dy));
        weights[(static_cast<std::size_t>(par) * h + dy) * row_len + static_cast<std::size_t>(j + nkx)] =
            dist > 0.0 ? static_cast<float>(1.0 / dist) : 0.0f;
      }

  const float slope = static_cast<float>(params.slope);
  const float limit = static_cast<float>(params.limit);
  constexpr int kLanes = 8;
  std::array<std::vector<double>, 3> response;
  for (auto& r : response) r.resize(static_cast<std::size_t>(w) * h);

  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const int m = px / s, par = px % s;
      float ip[3];
      for (int c = 0; c < 3; ++c) ip[c] = image.at(px, py, c) / 255.0f;
      double acc[3] = {0.0, 0.0, 0.0};
      double wsum = 0.0;
      for (int ky = 0; ky < nky; ++ky) {
        const int dy = std::abs(ky * s - py);
        const float* wrow = &weights[(static_cast<std::size_t>(par) * h + dy) * row_len +
                                     static_cast<std::size_t>(nkx - m)];
        const std::size_t base = static_cast<std::size_t>(ky) * nkx;
        const float* q0 = &lattice[0][base];
        const float* q1 = &lattice[1][base];
        const float* q2 = &lattice[2][base];
        float a0[kLanes] = {}, a1[kLanes] = {}, a2[kLanes] = {}, ws[kLanes] = {};
        int kx = 0;
        for (; kx + kLanes <= nkx; kx += kLanes) {
          for (int l = 0; l < kLanes; ++l) {
            const float wt = wrow[kx + l];
            a0[l] += wt * std::min(std::max(slope * (ip[0] - q0[kx + l]), -limit), limit);
            a1[l] += wt * std::min(std::max(slope * (ip[1] - q1[kx + l]), -limit), limit);
            a2[l] += wt * std::min(std::max(slope * (ip[2] - q2[kx + l]), -limit), limit);
            ws[l] += wt;
          }
        }
        for (; kx < nkx; ++kx) {
          const float wt = wrow[kx];
          a0[0] += wt * std::min(std::max(slope * (ip[0] - q0[kx]), -limit), limit);
          a1[0] += wt * std::min(std::max(slope * (ip[1] - q1[kx]), -limit), limit);
          a2[0] += wt * std::min(std::max(slope * (ip[2] - q2[kx]), -limit), limit);
          ws[0] += wt;
        }
        for (int l = 0; l < kLanes; ++l) {
          acc[0] += a0[l];
          acc[1] += a1[l];
          acc[2] += a2[l];
          wsum += ws[l];
        }
      }
      const std::size_t i = static_cast<std::size_t>(py) * w + px;
      for (int c = 0; c < 3; ++c) response[c][i] = wsum > 0.0 ? acc[c] / wsum : 0.0;
    }
  }

  RgbImage out(w, h);
  for (int c = 0; c < 3; ++c) {
    const auto [lo, hi] = std::minmax_element(response[c].begin(), response[c].end());
    stretch_into(out, c, response[c], *lo, *hi);
  }
  return out;
}

std::vector<std::uint8_t> clahe_plane(std::span<const std::uint8_t> plane, int width, int height,
                                      const ClaheParams& params) {
  if (params.tiles_x < 1 || params.tiles_y < 1 || params.tiles_x > width || params.tiles_y > height)
    fail(ErrorKind::InvalidArgument, "clahe: tile grid must fit inside the image");
  if (plane.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorKind::DimensionMismatch, "clahe: plane size does not match width x height");
  const int tx = params.tiles_x, ty = params.tiles_y;
  const bool clip = params.clip_limit > 0.0 && std::isfinite(params.clip_limit);

  std::vector<std::array<std::uint8_t, 256>> luts(static_cast<std::size_t>(tx) * ty);
  for (int j = 0; j < ty; ++j) {
    const int y0 = j * height / ty, y1 = (j + 1) * height / ty;
    for (int i = 0; i < tx; ++i) {
      const int x0 = i * width / tx, x1 = (i + 1) * width / tx;
      const long area = static_cast<long>(x1 - x0) * (y1 - y0);
      std::array<long, 256> hist{};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) ++hist[plane[static_cast<std::size_t>(y) * width + x]];

      if (clip) {
        const long limit = std::max(1L, static_cast<long>(params.clip_limit * static_cast<double>(area) / 256.0));
        long excess = 0;
        for (auto& b : hist) {
          if (b > limit) {
            excess += b - limit;
            b = limit;
          }
        }
        const long batch = excess / 256;
        long residual = excess - batch * 256;
        for (auto& b : hist) b += batch;
        if (residual > 0) {
          const long step = std::max(256L / residual, 1L);
          for (long k = 0; k < 256 && residual > 0; k += step, --residual) ++hist[static_cast<std::size_t>(k)];
        }
      }

      auto& lut = luts[static_cast<std::size_t>(j) * tx + i];
      const double scale = 255.0 / static_cast<double>(area);
      long cdf = 0;
      for (int v = 0; v < 256; ++v) {
        cdf += hist[static_cast<std::size_t>(v)];
        lut[static_cast<std::size_t>(v)] = clamp_to_byte(static_cast<double>(cdf) * scale);
      }
    }
  }

  // Bilinear blend of the four surrounding tile mappings, anchored at tile centers.
  std::vector<std::uint8_t> out(plane.size());
  const double tw = static_cast<double>(width) / tx, th = static_cast<double>(height) / ty;
  for (int y = 0; y < height; ++y) {
    const double fy = (y + 0.5) / th - 0.5;
    int j0 = static_cast<int>(std::floor(fy));
    const double wy = fy - j0;
    const int j1 = std::clamp(j0 + 1, 0, ty - 1);
    j0 = std::clamp(j0, 0, ty - 1);
    for (int x = 0; x < width; ++x) {
      const double fx = (x + 0.5) / tw - 0.5;
      int i0 = static_cast<int>(std::floor(fx));
      const double wx = fx - i0;
      const int i1 = std::clamp(i0 + 1, 0, tx - 1);
      i0 = std::clamp(i0, 0, tx - 1);
      const std::size_t v = plane[static_cast<std::size_t>(y) * width + x];
      const double top = (1.0 - wx) * luts[static_cast<std::size_t>(j0) * tx + i0][v] +
                         wx * luts[static_cast<std::size_t>(j0) * tx + i1][v];
      const double bottom = (1.0 - wx) * luts[static_cast<std::size_t>(j1) * tx + i0][v] +
                            wx * luts[static_cast<std::size_t>(j1) * tx + i1][v];
      out[static_cast<std::size_t>(y) * width + x] = clamp_to_byte((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

// CLAHE on BT.601 luma. Chroma is preserved by shifting all three channels by
// the luma change, which is the inverse YCbCr transform with Cb/Cr held fixed.
RgbImage apply_clahe(const RgbImage& image, const ClaheParams& params) {
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  std::vector<double> luma(n);
  std::vector<std::uint8_t> quantized(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* px = &image.pixels[i * 3];
    luma[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
    quantized[i] = clamp_to_byte(luma[i]);
  }
  const auto equalized = clahe_plane(quantized, image.width, image.height, params);
  RgbImage out(image.width, image.height);
  for (std::size_t i = 0; i < n; ++i) {
    const double delta = equalized[i] - luma[i];
    for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = clamp_to_byte(image.pixels[i * 3 + c] + delta);
  }
  return out;
}

AlignedFace enhance(const AlignedFace& face, const EnhancementMethod& method) {
  if (face.pixels.width != kAlignedSize || face.pixels.height != kAlignedSize)
    fail(ErrorKind::InvalidArgument, "enhance: aligned faces must be 224x224");
  AlignedFace out;
  out.source_id = face.source_id;
  out.enhancement = std::string(method.tag());
  switch (method.kind) {
    case EnhancementKind::None: return face;
    case EnhancementKind::Retinex: out.pixels = apply_retinex(face.pixels, method.retinex); break;
    case EnhancementKind::Ace: out.pixels = apply_ace(face.pixels, method.ace); break;
    case EnhancementKind::Clahe: out.pixels = apply_clahe(face.pixels, method.clahe); break;
  }
  return out;
}

}  // namespace xdv
