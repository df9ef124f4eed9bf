#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <optional>

#include "xdv/embedding.hpp"
#include "xdv/error.hpp"

namespace xdv {

std::string_view layer_tag(Layer layer) {
  switch (layer) {
    case Layer::Lbp: return "lbp";
    case Layer::Dct: return "dct";
    case Layer::Fc6n: return "fc6n";
    case Layer::Fc6: return "fc6";
    case Layer::Fc7n: return "fc7n";
    case Layer::Fc7: return "fc7";
    case Layer::Fc8: return "fc8";
  }
  return "lbp";
}

Layer layer_of(std::string_view tag) {
  for (Layer l : {Layer::Lbp, Layer::Dct, Layer::Fc6n, Layer::Fc6, Layer::Fc7n, Layer::Fc7, Layer::Fc8})
    if (layer_tag(l) == tag) return l;
  fail(ErrorKind::InvalidArgument,
       "unknown layer '" + std::string(tag) + "' (valid: lbp, dct, fc6n, fc6, fc7n, fc7, fc8)");
}

bool is_builtin(Layer layer) noexcept { return layer == Layer::Lbp || layer == Layer::Dct; }

bool is_rectified(Layer layer) noexcept { return layer == Layer::Fc6 || layer == Layer::Fc7; }

Layer stored_layer(Layer layer) noexcept {
  if (layer == Layer::Fc6) return Layer::Fc6n;
  if (layer == Layer::Fc7) return Layer::Fc7n;
  return layer;
}

std::size_t expected_dim(Layer layer) noexcept {
  switch (layer) {
    case Layer::Fc6n:
    case Layer::Fc6:
    case Layer::Fc7n:
    case Layer::Fc7: return kFc67Dim;
    case Layer::Fc8: return kFc8Dim;
    default: return 0;
  }
}

void validate(const FeatureVector& v) {
  if (v.values.empty()) fail(ErrorKind::InvalidArgument, "feature vector is empty");
  for (std::size_t i = 0; i < v.values.size(); ++i)
    if (!std::isfinite(v.values[i]))
      fail(ErrorKind::NonFinite, "feature vector '" + v.meta.sample_id + "' has a non-finite value at index " +
                                     std::to_string(i));
}

const std::array<std::uint8_t, 256>& uniform_lbp_bins() {
  static const auto table = [] {
    std::array<std::uint8_t, 256> t{};
    std::uint8_t next = 0;
    for (unsigned code = 0; code < 256; ++code) {
      const unsigned rotated = ((code >> 1) | (code << 7)) & 0xFFu;
      const int transitions = std::popcount(code ^ rotated);
      t[code] = transitions <= 2 ? next++ : static_cast<std::uint8_t>(kLbpBins - 1);
    }
    return t;
  }();
  return table;
}

FeatureVector embed_lbp(const AlignedFace& face) {
  const Plane gray = to_luma(face.pixels);
  const int w = gray.width, h = gray.height;
  if (w % kLbpGrid != 0 || h % kLbpGrid != 0)
    fail(ErrorKind::InvalidArgument, "lbp: image size must be a multiple of the cell grid");
  const int cell_w = w / kLbpGrid, cell_h = h / kLbpGrid;
  // Clockwise from the top-left neighbor; bit k set when neighbor k >= center.
  static constexpr int kDx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  static constexpr int kDy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  const auto& bins = uniform_lbp_bins();

  FeatureVector out;
  out.values.assign(kLbpDim, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double center = gray.at(x, y);
      unsigned code = 0;
      for (int k = 0; k < 8; ++k) {
        const double n = gray.at(std::clamp(x + kDx[k], 0, w - 1), std::clamp(y + kDy[k], 0, h - 1));
        code |= static_cast<unsigned>(n >= center) << k;
      }
      const std::size_t cell = static_cast<std::size_t>(y / cell_h) * kLbpGrid + static_cast<std::size_t>(x / cell_w);
      out.values[cell * kLbpBins + bins[code]] += 1.0;
    }
  }
  out.meta.embedder = "lbp";
  out.meta.layer = "lbp";
  out.meta.sample_id = face.source_id;
  return out;
}

const std::array<std::uint8_t, 64>& zigzag_order() {
  static const auto order = [] {
    std::array<std::uint8_t, 64> o{};
    std::size_t k = 0;
    for (int s = 0; s <= 14; ++s) {
      if (s % 2 == 0) {
        for (int r = std::min(s, 7); r >= std::max(0, s - 7); --r) o[k++] = static_cast<std::uint8_t>(r * 8 + (s - r));
      } else {
        for (int r = std::max(0, s - 7); r <= std::min(s, 7); ++r) o[k++] = static_cast<std::uint8_t>(r * 8 + (s - r));
      }
    }
    return o;
  }();
  return order;
}

std::array<double, 64> dct8x8(std::span<const double, 64> block) {
  static const auto basis = [] {
    std::array<double, 64> b{};  // b[k*8+n] = alpha(k) cos(pi (2n+1) k / 16)
    for (int k = 0; k < 8; ++k)
      for (int n = 0; n < 8; ++n)
        b[static_cast<std::size_t>(k * 8 + n)] =
            (k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0)) * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
    return b;
  }();
  std::array<double, 64> rows{};  // transform along x
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int x = 0; x < 8; ++x) acc += basis[static_cast<std::size_t>(u * 8 + x)] * block[static_cast<std::size_t>(y * 8 + x)];
      rows[static_cast<std::size_t>(y * 8 + u)] = acc;
    }
  std::array<double, 64> out{};  // then along y; out[v*8+u]
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double acc = 0.0;
      for (int y = 0; y < 8; ++y) acc += basis[static_cast<std::size_t>(v * 8 + y)] * rows[static_cast<std::size_t>(y * 8 + u)];
      out[static_cast<std::size_t>(v * 8 + u)] = acc;
    }
  return out;
}

FeatureVector embed_dct(const AlignedFace& face) {
  const Plane gray = to_luma(face.pixels);
  if (gray.width % kDctBlock != 0 || gray.height % kDctBlock != 0)
    fail(ErrorKind::InvalidArgument, "dct: image size must be a multiple of 8");
  const int bw = gray.width / kDctBlock, bh = gray.height / kDctBlock;
  const auto& zz = zigzag_order();
  FeatureVector out;
  out.values.reserve(static_cast<std::size_t>(bw) * bh * kDctCoefficients);
  std::array<double, 64> block{};
  for (int by = 0; by < bh; ++by)
    for (int bx = 0; bx < bw; ++bx) {
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) block[static_cast<std::size_t>(y * 8 + x)] = gray.at(bx * 8 + x, by * 8 + y);
      const auto coeffs = dct8x8(block);
      for (std::size_t k = 0; k < kDctCoefficients; ++k) out.values.push_back(coeffs[zz[k]]);
    }
  out.meta.embedder = "dct";
  out.meta.layer = "dct";
  out.meta.sample_id = face.source_id;
  return out;
}

FeatureVector rectify(FeatureVector v) {
  for (auto& x : v.values) x = std::max(0.0, x);
  v.meta.rectified = true;
  return v;
}

double sparsity(const FeatureVector& v) {
  if (v.values.empty()) fail(ErrorKind::InvalidArgument, "sparsity of an empty vector");
  const auto zeros = std::count(v.values.begin(), v.values.end(), 0.0);
  return static_cast<double>(zeros) / static_cast<double>(v.values.size());
}

std::vector<FeatureVector> embed_builtin(const AlignedFace& face, std::span<const Layer> layers, Layer base) {
  if (!is_builtin(base)) fail(ErrorKind::InvalidArgument, "surrogate head base must be lbp or dct");
  std::vector<FeatureVector> out;
  out.reserve(layers.size());
  std::optional<SurrogateHead::Activations> acts;
  for (const Layer layer : layers) {
    if (layer == Layer::Lbp) {
      out.push_back(embed_lbp(face));
      continue;
    }
    if (layer == Layer::Dct) {
      out.push_back(embed_dct(face));
      continue;
    }
    if (!acts) {
      static const SurrogateHead lbp_head(kLbpDim);
      static const SurrogateHead dct_head(kDctDim);
      FeatureVector descriptor = base == Layer::Lbp ? embed_lbp(face) : embed_dct(face);
      // Bring both descriptors to unit-order magnitudes before the projection.
      const double scale = base == Layer::Lbp ? 1.0 / 784.0 * 8.0 : 1.0 / 255.0;
      for (auto& x : descriptor.values) x *= scale;
      acts = (base == Layer::Lbp ? lbp_head : dct_head).forward(descriptor.values);
    }
    FeatureVector v;
    switch (stored_layer(layer)) {
      case Layer::Fc6n: v.values = acts->fc6n; break;
      case Layer::Fc7n: v.values = acts->fc7n; break;
      default: v.values = acts->fc8; break;
    }
    v.meta.embedder = "surrogate-" + std::string(layer_tag(base));
    v.meta.layer = std::string(layer_tag(stored_layer(layer)));
    v.meta.sample_id = face.source_id;
    if (is_rectified(layer)) {
      v = rectify(std::move(v));
      v.meta.layer = std::string(layer_tag(layer));
    }
    out.push_back(std::move(v));
  }
  return out;
}

FeatureVector embed_builtin(const AlignedFace& face, Layer layer, Layer base) {
  const Layer one[] = {layer};
  return std::move(embed_builtin(face, one, base).front());
}

}  // namespace xdv
