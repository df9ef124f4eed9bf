#include <algorithm>
#include <bit>
#include <cmath>

#include "xdv/error.hpp"
#include "xdv/vectorops.hpp"

namespace xdv {
namespace {

constexpr std::size_t kDirectCorrelationMax = 256;

}  // namespace

std::string_view norm_tag(NormMethod m) {
  switch (m) {
    case NormMethod::None: return "none";
    case NormMethod::L1: return "l1";
    case NormMethod::L2: return "l2";
    case NormMethod::Z: return "z";
  }
  return "none";
}

NormMethod norm_of(std::string_view tag) {
  for (NormMethod m : {NormMethod::None, NormMethod::L1, NormMethod::L2, NormMethod::Z})
    if (norm_tag(m) == tag) return m;
  fail(ErrorKind::InvalidArgument, "unknown normalization '" + std::string(tag) + "' (valid: none, l1, l2, z)");
}

std::string_view combine_tag(CombineMethod m) {
  switch (m) {
    case CombineMethod::AbsSub: return "sub";
    case CombineMethod::Mult: return "mult";
    case CombineMethod::CrossCorr: return "cross";
    case CombineMethod::PhaseCorr: return "phase";
  }
  return "sub";
}

CombineMethod combine_of(std::string_view tag) {
  for (CombineMethod m : {CombineMethod::AbsSub, CombineMethod::Mult, CombineMethod::CrossCorr, CombineMethod::PhaseCorr})
    if (combine_tag(m) == tag) return m;
  fail(ErrorKind::InvalidArgument, "unknown combination '" + std::string(tag) + "' (valid: sub, mult, cross, phase)");
}

std::vector<double> normalize(std::span<const double> v, NormMethod m) {
  std::vector<double> out(v.begin(), v.end());
  switch (m) {
    case NormMethod::None: break;
    case NormMethod::L1: {
      double norm = 0.0;
      for (double x : v) norm += std::abs(x);
      if (!(norm > 0.0)) fail(ErrorKind::DegenerateVector, "L1 normalization of an all-zero vector");
      for (auto& x : out) x /= norm;
      break;
    }
    case NormMethod::L2: {
      double sq = 0.0;
      for (double x : v) sq += x * x;
      const double norm = std::sqrt(sq);
      if (!(norm > 0.0)) fail(ErrorKind::DegenerateVector, "L2 normalization of an all-zero vector");
      for (auto& x : out) x /= norm;
      break;
    }
    case NormMethod::Z: {
      if (v.empty()) fail(ErrorKind::DegenerateVector, "Z normalization of an empty vector");
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = std::sqrt(var / static_cast<double>(v.size()));
      if (!(sd > 0.0)) fail(ErrorKind::DegenerateVector, "Z normalization of a constant vector");
      for (auto& x : out) x = (x - mean) / sd;
      break;
    }
  }
  return out;
}

FeatureVector normalize(const FeatureVector& v, NormMethod m) {
  FeatureVector out;
  out.values = normalize(v.values, m);
  out.meta = v.meta;
  out.meta.normalization = std::string(norm_tag(m));
  return out;
}

std::vector<double> cross_correlate(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::DimensionMismatch, "cross-correlation of vectors with different lengths");
  const std::size_t d = a.size();
  std::vector<double> f(d, 0.0);
  if (d <= kDirectCorrelationMax) {
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j + i < d; ++j) acc += a[j] * b[j + i];
      f[i] = acc;
    }
    return f;
  }
  // c[i] = sum_j a_j b_{j+i} = IFFT(conj(A) B)[i] with zero padding to >= 2d.
  const std::size_t m = std::bit_ceil(2 * d);
  std::vector<Complex> fa(m), fb(m);
  for (std::size_t i = 0; i < d; ++i) {
    fa[i] = a[i];
    fb[i] = b[i];
  }
  fft_inplace(fa, false);
  fft_inplace(fb, false);
  for (std::size_t k = 0; k < m; ++k) fa[k] = std::conj(fa[k]) * fb[k];
  fft_inplace(fa, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < d; ++i) f[i] = fa[i].real() * scale;
  return f;
}

std::vector<double> combine(std::span<const double> a, std::span<const double> b, CombineMethod m,
                            const CombineOptions& options) {
  if (a.size() != b.size())
    fail(ErrorKind::DimensionMismatch, "cannot combine vectors of dimension " + std::to_string(a.size()) + " and " +
                                           std::to_string(b.size()));
  if (a.empty()) fail(ErrorKind::InvalidArgument, "cannot combine empty vectors");
  const std::size_t d = a.size();
  std::vector<double> f(d);
  switch (m) {
    case CombineMethod::AbsSub:
      for (std::size_t i = 0; i < d; ++i) f[i] = std::abs(a[i] - b[i]);
      return f;
    case CombineMethod::Mult:
      for (std::size_t i = 0; i < d; ++i) f[i] = a[i] * b[i];
      return f;
    case CombineMethod::CrossCorr:
      return cross_correlate(a, b);
    case CombineMethod::PhaseCorr: {
      std::vector<Complex> g = dft(a);
      const std::vector<Complex> fb = dft(b);
      if (options.classical_phase) {
        double peak = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          g[k] = std::conj(g[k]) * fb[k];
          peak = std::max(peak, std::abs(g[k]));
        }
        if (!(peak > 0.0)) fail(ErrorKind::DegenerateSpectrum, "phase correlation: cross spectrum is zero");
        const double eps = peak * 1e-12;
        for (auto& z : g) z /= std::max(std::abs(z), eps);
      } else {
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          g[k] *= fb[k];
          sq += std::norm(g[k]);
        }
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0)) fail(ErrorKind::DegenerateSpectrum, "phase correlation: ||DFT(a) o DFT(b)||_2 is zero");
        for (auto& z : g) z /= norm;
      }
      const auto inv = idft(g);
      for (std::size_t i = 0; i < d; ++i) f[i] = inv[i].real();
      return f;
    }
  }
  return f;
}

FeatureVector combine(const FeatureVector& a, const FeatureVector& b, CombineMethod m, const CombineOptions& options) {
  if (a.meta.normalization != b.meta.normalization)
    fail(ErrorKind::InvalidArgument, "cannot combine vectors with different normalizations ('" +
                                         a.meta.normalization + "' vs '" + b.meta.normalization + "')");
  FeatureVector out;
  out.values = combine(a.values, b.values, m, options);
  out.meta = a.meta;
  out.meta.sample_id = a.meta.sample_id + "|" + b.meta.sample_id;
  return out;
}

}  // namespace xdv
