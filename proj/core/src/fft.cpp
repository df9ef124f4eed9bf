#include <bit>
#include <cmath>
#include <numbers>

#include "xdv/error.hpp"
#include "xdv/vectorops.hpp"

namespace xdv {
namespace {

void radix2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles evaluated directly to avoid recurrence drift.
        const Complex w(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Chirp-z evaluation of an arbitrary-length DFT through a power-of-two
// circular convolution.
void bluestein(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small and exact.
    const auto k2 = static_cast<double>((static_cast<unsigned long long>(k) * k) % (2 * n));
    const double ang = sign * std::numbers::pi * k2 / static_cast<double>(n);
    chirp[k] = Complex(std::cos(ang), std::sin(ang));
  }
  std::vector<Complex> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  radix2(x, false);
  radix2(y, false);
  for (std::size_t i = 0; i < m; ++i) x[i] *= y[i];
  radix2(x, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

}  // namespace

void fft_inplace(std::vector<Complex>& data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (std::has_single_bit(n)) radix2(data, inverse);
  else bluestein(data, inverse);
}

std::vector<Complex> dft(std::span<const Complex> v) {
  if (v.empty()) fail(ErrorKind::InvalidArgument, "dft of an empty sequence");
  std::vector<Complex> out(v.begin(), v.end());
  fft_inplace(out, false);
  return out;
}

std::vector<Complex> dft(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::InvalidArgument, "dft of an empty sequence");
  std::vector<Complex> out(v.begin(), v.end());
  fft_inplace(out, false);
  return out;
}

std::vector<Complex> idft(std::span<const Complex> c) {
  if (c.empty()) fail(ErrorKind::InvalidArgument, "idft of an empty sequence");
  std::vector<Complex> out(c.begin(), c.end());
  fft_inplace(out, true);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& z : out) z *= scale;
  return out;
}

}  // namespace xdv
