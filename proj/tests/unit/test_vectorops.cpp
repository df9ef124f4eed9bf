#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "xdv/error.hpp"
#include "xdv/rng.hpp"
#include "xdv/vectorops.hpp"

using namespace xdv;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t d, double zero_fraction = 0.0) {
  std::vector<double> v(d);
  for (auto& x : v) x = rng.uniform() < zero_fraction ? 0.0 : rng.normal() * 3.0 + 0.5;
  return v;
}

std::vector<double> cross_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t d = a.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j + i < d; ++j) out[i] += a[j] * b[j + i];
  return out;
}

std::vector<Complex> dft_oracle(const std::vector<Complex>& x, double sign) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t)
      out[k] += x[t] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n));
  return out;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidArgument;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

}  // namespace

TEST_CASE("normalization examples") {
  check_close(normalize(std::vector<double>{2, -2, 4}, NormMethod::L1), {0.25, -0.25, 0.5}, 1e-15);
  check_close(normalize(std::vector<double>{3, 4}, NormMethod::L2), {0.6, 0.8}, 1e-15);
  check_close(normalize(std::vector<double>{1, 2, 3}, NormMethod::Z), {-1.2247, 0, 1.2247}, 1e-4);
  const std::vector<double> v{1.5, -2, 0};
  CHECK(normalize(v, NormMethod::None) == v);
}

TEST_CASE("normalization errors") {
  CHECK(kind_of([] { normalize(std::vector<double>{0, 0, 0}, NormMethod::L1); }) == ErrorKind::DegenerateVector);
  CHECK(kind_of([] { normalize(std::vector<double>{0, 0}, NormMethod::L2); }) == ErrorKind::DegenerateVector);
  CHECK(kind_of([] { normalize(std::vector<double>{5, 5, 5}, NormMethod::Z); }) == ErrorKind::DegenerateVector);
  CHECK(kind_of([] { norm_of("max"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("normalization invariants on random vectors") {
  Rng rng(2024);
  for (int t = 0; t < 200; ++t) {
    const auto v = random_vector(rng, 1 + rng.below(300), 0.3);
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) continue;
    const auto l1 = normalize(v, NormMethod::L1);
    const auto l2 = normalize(v, NormMethod::L2);
    double s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      s1 += std::abs(l1[i]);
      s2 += l2[i] * l2[i];
      CHECK((v[i] == 0.0) == (l1[i] == 0.0));
      CHECK((v[i] == 0.0) == (l2[i] == 0.0));
    }
    CHECK(std::abs(s1 - 1.0) <= 1e-9);
    CHECK(std::abs(std::sqrt(s2) - 1.0) <= 1e-9);
    if (v.size() > 1) {
      const auto z = normalize(v, NormMethod::Z);
      const double mean = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
      double var = 0;
      for (double x : z) var += (x - mean) * (x - mean);
      CHECK(std::abs(mean) <= 1e-9);
      CHECK(std::abs(std::sqrt(var / static_cast<double>(z.size())) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("feature vector normalization records the method") {
  FeatureVector v;
  v.values = {3, 4};
  v.meta.sample_id = "x";
  const auto n = normalize(v, NormMethod::L2);
  CHECK(n.meta.normalization == "l2");
  CHECK(n.meta.sample_id == "x");
}

TEST_CASE("combination examples") {
  const std::vector<double> a{1, 2, 3};
  CHECK(combine(a, a, CombineMethod::AbsSub) == std::vector<double>{0, 0, 0});
  CHECK(combine(std::vector<double>{1, 0}, std::vector<double>{0, 1}, CombineMethod::Mult) == std::vector<double>{0, 0});
  CHECK(combine(std::vector<double>{1, 0, 0}, std::vector<double>{0, 1, 0}, CombineMethod::CrossCorr) ==
        std::vector<double>{0, 1, 0});
  CHECK(combine(std::vector<double>{1, 5}, std::vector<double>{4, 2}, CombineMethod::AbsSub) == std::vector<double>{3, 3});
  CHECK(kind_of([] { combine(std::vector<double>{1, 2}, std::vector<double>{1}, CombineMethod::Mult); }) ==
        ErrorKind::DimensionMismatch);
}

TEST_CASE("cross correlation matches the double loop") {
  Rng rng(17);
  for (std::size_t d = 1; d <= 64; ++d) {
    auto a = random_vector(rng, d), b = random_vector(rng, d);
    // integer-valued inputs make every product and sum exact
    for (auto& x : a) x = std::round(x * 4);
    for (auto& x : b) x = std::round(x * 4);
    CHECK(cross_correlate(a, b) == cross_oracle(a, b));
    CHECK(combine(a, b, CombineMethod::CrossCorr) == cross_oracle(a, b));
    const auto ar = random_vector(rng, d), br = random_vector(rng, d);
    check_close(cross_correlate(ar, br), cross_oracle(ar, br), 1e-12);
  }
  for (std::size_t d : {257u, 1000u, 4096u}) {
    const auto a = random_vector(rng, d), b = random_vector(rng, d);
    const auto expect = cross_oracle(a, b);
    double scale = 0;
    for (double x : expect) scale = std::max(scale, std::abs(x));
    check_close(cross_correlate(a, b), expect, 1e-9 * scale);
  }
}

TEST_CASE("dft examples and round trip") {
  const auto c = dft(std::vector<double>{1, 1, 1, 1});
  CHECK(std::abs(c[0] - Complex(4, 0)) < 1e-12);
  for (int k = 1; k < 4; ++k) CHECK(std::abs(c[k]) < 1e-12);
  for (const auto& x : dft(std::vector<double>{1, 0, 0, 0})) CHECK(std::abs(x - Complex(1, 0)) < 1e-12);

  Rng rng(8);
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 12u, 17u, 64u, 100u, 127u}) {
    std::vector<Complex> x(n);
    for (auto& v : x) v = {rng.normal(), rng.normal()};
    const auto fx = dft(x);
    const auto ref = dft_oracle(x, -1.0);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(fx[k] - ref[k]) < 1e-9);
    const auto back = idft(fx);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(back[k] - x[k]) < 1e-9);
  }
  for (std::size_t n : {4096u, 4097u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    const auto back = idft(dft(x));
    double worst = 0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(back[k] - Complex(x[k], 0)));
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("phase correlation of two impulses peaks at zero") {
  const std::vector<double> impulse{1, 0, 0, 0};
  // reference: G = DFT(a) o DFT(b) = all ones, ||G|| = 2, IDFT(G/2) = [0.5, 0, 0, 0]
  const auto f = combine(impulse, impulse, CombineMethod::PhaseCorr);
  check_close(f, {0.5, 0, 0, 0}, 1e-12);
  const auto g = combine(impulse, impulse, CombineMethod::PhaseCorr, {true});
  check_close(g, {1, 0, 0, 0}, 1e-12);
}

TEST_CASE("phase correlation matches a direct spectral oracle") {
  Rng rng(12);
  for (std::size_t d : {6u, 16u, 31u}) {
    const auto a = random_vector(rng, d), b = random_vector(rng, d);
    std::vector<Complex> ca(a.begin(), a.end()), cb(b.begin(), b.end());
    const auto fa = dft_oracle(ca, -1.0), fb = dft_oracle(cb, -1.0);
    std::vector<Complex> g(d);
    double norm = 0;
    for (std::size_t k = 0; k < d; ++k) {
      g[k] = fa[k] * fb[k];
      norm += std::norm(g[k]);
    }
    norm = std::sqrt(norm);
    for (auto& x : g) x /= norm;
    auto inv = dft_oracle(g, 1.0);
    std::vector<double> expect(d);
    for (std::size_t k = 0; k < d; ++k) expect[k] = inv[k].real() / static_cast<double>(d);
    check_close(combine(a, b, CombineMethod::PhaseCorr), expect, 1e-12);
  }
  const std::vector<double> zero(8, 0.0);
  CHECK(kind_of([&] { combine(zero, zero, CombineMethod::PhaseCorr); }) == ErrorKind::DegenerateSpectrum);
}

TEST_CASE("symmetric combinations are symmetric") {
  Rng rng(5);
  const auto a = random_vector(rng, 40), b = random_vector(rng, 40);
  CHECK(combine(a, b, CombineMethod::AbsSub) == combine(b, a, CombineMethod::AbsSub));
  CHECK(combine(a, b, CombineMethod::Mult) == combine(b, a, CombineMethod::Mult));
  const auto cc = cross_correlate(a, b);
  CHECK(cc[0] == doctest::Approx(std::inner_product(a.begin(), a.end(), b.begin(), 0.0)));
}
