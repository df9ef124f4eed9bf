#pragma once

#include <complex>
#include <span>
#include <string_view>
#include <vector>

#include "xdv/embedding.hpp"

namespace xdv {

using Complex = std::complex<double>;

enum class NormMethod { None, L1, L2, Z };
enum class CombineMethod { AbsSub, Mult, CrossCorr, PhaseCorr };

std::string_view norm_tag(NormMethod m);          // none | l1 | l2 | z
NormMethod norm_of(std::string_view tag);
std::string_view combine_tag(CombineMethod m);    // sub | mult | cross | phase
CombineMethod combine_of(std::string_view tag);

// L1 / L2: divide by the norm. Z: subtract the vector's own mean and divide by
// its population standard deviation. Throws DegenerateVector on a zero norm
// or zero spread.
std::vector<double> normalize(std::span<const double> v, NormMethod m);
FeatureVector normalize(const FeatureVector& v, NormMethod m);

struct CombineOptions {
  // Phase correlation as the classical conj(A) * B / |conj(A) * B| instead of
  // the default A * B / ||A * B||_2.
  bool classical_phase = false;
};

// Pair combination keeping dimension d:
//   AbsSub    f_i = |a_i - b_i|
//   Mult      f_i = a_i b_i
//   CrossCorr f_i = sum_j a_j b_{j+i}, i = 0..d-1, out-of-range terms zero
//   PhaseCorr f = Re IDFT(G / ||G||_2), G = DFT(a) o DFT(b)
std::vector<double> combine(std::span<const double> a, std::span<const double> b, CombineMethod m,
                            const CombineOptions& options = {});
FeatureVector combine(const FeatureVector& a, const FeatureVector& b, CombineMethod m,
                      const CombineOptions& options = {});

// Linear cross-correlation over non-negative lags (direct for short inputs,
// FFT-based otherwise).
std::vector<double> cross_correlate(std::span<const double> a, std::span<const double> b);

// X_k = sum_n x_n exp(-2 pi i k n / N), any N >= 1.
std::vector<Complex> dft(std::span<const double> v);
std::vector<Complex> dft(std::span<const Complex> v);
// x_n = (1/N) sum_k X_k exp(+2 pi i k n / N).
std::vector<Complex> idft(std::span<const Complex> c);

// In-place unnormalized transform of any length (radix-2, or Bluestein for
// other lengths). `inverse` flips the exponent sign without scaling.
void fft_inplace(std::vector<Complex>& data, bool inverse);

}  // namespace xdv
