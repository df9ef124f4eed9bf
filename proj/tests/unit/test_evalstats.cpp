#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "xdv/error.hpp"
#include "xdv/evalstats.hpp"
#include "xdv/rng.hpp"

using namespace xdv;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Rates {
  double far, frr;
};

Rates count_rates(const PairScoreSet& s, double tau) {
  double fp = 0, tn = 0, fn = 0, tp = 0;
  for (const auto& p : s) {
    const bool accept = p.score >= tau;
    if (p.genuine) (accept ? tp : fn) += 1;
    else (accept ? fp : tn) += 1;
  }
  return {fp / (fp + tn), fn / (fn + tp)};
}

std::vector<double> candidates(const PairScoreSet& s) {
  std::set<double> distinct;
  for (const auto& p : s) distinct.insert(p.score);
  std::vector<double> v(distinct.begin(), distinct.end());
  std::vector<double> out{-kInf};
  for (std::size_t i = 0; i + 1 < v.size(); ++i) out.push_back(v[i] + (v[i + 1] - v[i]) / 2);
  out.push_back(kInf);
  return out;
}

PairScoreSet random_set(Rng& rng) {
  PairScoreSet s;
  const auto n_gen = 1 + rng.below(30), n_imp = 1 + rng.below(120);
  const bool coarse = rng.uniform() < 0.5;  // coarse scores produce many ties
  auto draw = [&](double shift) { return coarse ? std::round(rng.normal() * 3 + shift) / 4 : rng.normal() + shift / 4; };
  for (std::uint64_t i = 0; i < n_gen; ++i) s.push_back({draw(4.0), true});
  for (std::uint64_t i = 0; i < n_imp; ++i) s.push_back({draw(0.0), false});
  rng.shuffle(std::span<ScoredPair>(s));
  return s;
}

// Upper-tail integral of the chi-square density by composite Simpson.
double chi2_sf_oracle(double x, double k) {
  auto pdf = [&](double t) {
    return std::exp((k / 2 - 1) * std::log(t) - t / 2 - (k / 2) * std::log(2.0) - std::lgamma(k / 2));
  };
  const double hi = x + 400.0;
  const int n = 400000;
  const double h = (hi - x) / n;
  double acc = pdf(x) + pdf(hi);
  for (int i = 1; i < n; ++i) acc += pdf(x + i * h) * (i % 2 ? 4 : 2);
  return acc * h / 3;
}

double kw_oracle(const std::vector<std::vector<double>>& groups) {
  std::vector<double> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  const double n = static_cast<double>(all.size());
  auto rank = [&](double v) {
    double below = 0, equal = 0;
    for (double x : all) {
      below += x < v;
      equal += x == v;
    }
    return below + (equal + 1) / 2;
  };
  double h = 0;
  for (const auto& g : groups) {
    double r = 0;
    for (double v : g) r += rank(v);
    h += r * r / static_cast<double>(g.size());
  }
  h = 12.0 / (n * (n + 1)) * h - 3 * (n + 1);
  std::map<double, double> ties;
  for (double x : all) ties[x] += 1;
  double t = 0;
  for (const auto& [v, c] : ties) t += c * c * c - c;
  return h / (1 - t / (n * n * n - n));
}

}  // namespace

TEST_CASE("rates examples") {
  const PairScoreSet s{{0.9, true}, {0.8, true}, {0.1, false}, {0.2, false}};
  const auto r = rates_at(s, 0.5);
  CHECK(r.far == 0.0);
  CHECK(r.frr == 0.0);
  CHECK(r.hter == 0.0);
  const auto all = rates_at(s, -kInf);
  CHECK(all.far == 1.0);
  CHECK(all.frr == 0.0);
  CHECK(all.hter == 0.5);
  CHECK(make_report(0.0, 0.02222, 0.10000).hter == doctest::Approx(0.06111).epsilon(1e-4));
  const auto c = confusion_at(s, 0.85);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 2);
  CHECK(c.fp == 0);
}

TEST_CASE("rates need both classes") {
  const PairScoreSet only{{0.9, true}, {0.3, true}};
  try {
    rates_at(only, 0.5);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
  CHECK_THROWS_AS(eer_threshold(only), Error);
}

TEST_CASE("metrics agree with an exhaustive threshold sweep") {
  Rng rng(777);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_set(rng);
    const auto cands = candidates(s);

    double best_diff = kInf, best_sum = kInf, best_tau = kInf;
    for (double tau : cands) {
      const auto want = count_rates(s, tau);
      const auto got = rates_at(s, tau);
      CHECK(got.far == want.far);
      CHECK(got.frr == want.frr);
      const double diff = std::abs(want.far - want.frr), sum = want.far + want.frr;
      if (diff < best_diff || (diff == best_diff && (sum < best_sum || (sum == best_sum && tau < best_tau)))) {
        best_diff = diff;
        best_sum = sum;
        best_tau = tau;
      }
    }
    const auto eer = eer_threshold(s);
    CHECK(eer.tau == best_tau);
    const auto at = count_rates(s, best_tau);
    CHECK(eer.far == at.far);
    CHECK(eer.frr == at.frr);
    CHECK(std::abs(eer.hter - (at.far + at.frr) / 2) <= 1e-12);

    const auto det = det_points(s);
    REQUIRE(det.size() == cands.size());
    for (std::size_t i = 0; i < det.size(); ++i) {
      const auto want = count_rates(s, cands[i]);
      CHECK(det[i].tau == cands[i]);
      CHECK(det[i].far == want.far);
      CHECK(det[i].frr == want.frr);
      if (i > 0) {
        CHECK(det[i].far <= det[i - 1].far);
        CHECK(det[i].frr >= det[i - 1].frr);
      }
    }
  }
}

TEST_CASE("eer special cases") {
  const PairScoreSet separated{{0.9, true}, {0.8, true}, {0.1, false}, {0.2, false}};
  CHECK(eer_threshold(separated).hter == 0.0);
  CHECK(eer_threshold(separated).tau == doctest::Approx(0.5));

  // the only crossing of the inverted pair is its midpoint, where both rates are 1
  const PairScoreSet inverted{{0.4, true}, {0.6, false}};
  const auto inv = eer_threshold(inverted);
  CHECK(inv.tau == doctest::Approx(0.5));
  CHECK(inv.far == 1.0);
  CHECK(inv.frr == 1.0);
  CHECK(inv.hter == 1.0);

  const PairScoreSet flat{{0.3, true}, {0.3, false}, {0.3, false}};
  CHECK(eer_threshold(flat).hter == 0.5);
}

TEST_CASE("eer is invariant under increasing transforms") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    auto s = random_set(rng);
    const auto a = eer_threshold(s);
    for (auto& p : s) p.score = std::exp(p.score);
    const auto b = eer_threshold(s);
    CHECK(a.far == b.far);
    CHECK(a.frr == b.frr);
  }
}

TEST_CASE("det staircase and clamping") {
  const PairScoreSet two{{0.8, true}, {0.2, false}};
  const auto det = det_points(two);
  REQUIRE(det.size() == 3);
  CHECK(det[0].far == 1.0);
  CHECK(det[0].frr == 0.0);
  CHECK(det[1].far == 0.0);
  CHECK(det[1].frr == 0.0);
  CHECK(det[2].far == 0.0);
  CHECK(det[2].frr == 1.0);

  PairScoreSet s{{1.0, true}};
  for (int i = 0; i < 90; ++i) s.push_back({-static_cast<double>(i), false});
  const auto pts = det_points(s);
  CHECK(pts.back().far == 0.0);
  CHECK(pts.back().probit_far == doctest::Approx(normal_quantile(1.0 / 180.0)));
  CHECK(pts.front().probit_far == doctest::Approx(normal_quantile(1.0 - 1.0 / 180.0)));

  const auto csv = det_csv(pts);
  CHECK(csv.rfind("tau,far,frr,probit_far,probit_frr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(pts.size() + 1));
}

TEST_CASE("distributions") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975));
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999}) CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  CHECK(chi2_sf(0.0, 3) == 1.0);
  for (double k : {1.0, 2.0, 3.0, 5.0})
    for (double x : {0.5, 2.0, 7.2, 15.0}) CHECK(std::abs(chi2_sf(x, k) - chi2_sf_oracle(x, k)) < 1e-7);
}

TEST_CASE("kruskal wallis examples") {
  const std::vector<std::vector<double>> g{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto r = kruskal_wallis(g);
  CHECK(r.h == doctest::Approx(7.2));
  CHECK(std::abs(r.p - chi2_sf_oracle(7.2, 2)) < 1e-3);
  CHECK(r.p == doctest::Approx(0.0273).epsilon(0.01));

  const std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
  CHECK(kruskal_wallis(same).p >= 0.99);

  Rng rng(6);
  std::vector<std::vector<double>> far(2);
  for (int i = 0; i < 100; ++i) {
    far[0].push_back(rng.normal());
    far[1].push_back(rng.normal() + 10);
  }
  CHECK(kruskal_wallis(far).p < 1e-10);

  const std::vector<std::vector<double>> one{{1, 2}};
  CHECK_THROWS_AS(kruskal_wallis(one), Error);
  const std::vector<std::vector<double>> empty{{1, 2}, {}};
  CHECK_THROWS_AS(kruskal_wallis(empty), Error);
}

TEST_CASE("kruskal wallis matches the direct formula with ties") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<double>> g(2 + rng.below(4));
    for (auto& grp : g) {
      grp.resize(1 + rng.below(12));
      for (auto& v : grp) v = std::round(rng.normal() * 2);
    }
    const auto r = kruskal_wallis(g);
    const double h = kw_oracle(g);
    if (std::isfinite(h)) CHECK(r.h == doctest::Approx(h).epsilon(1e-10));
  }
}

TEST_CASE("dunn post hoc") {
  const std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}, {1, 2, 3}};
  const auto d = dunn_posthoc(same);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) CHECK(d.at(i, j) == 1.0);
  CHECK(std::isnan(d.at(0, 0)));

  // raw p-values near 0.5 times six comparisons exceed one
  const std::vector<std::vector<double>> near{{1, 5, 9}, {2, 6, 10}, {3, 7, 11}, {4, 8, 12}};
  const auto n = dunn_posthoc(near);
  CHECK(n.k == 4);
  CHECK(n.comparisons() == 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (i != j) {
        CHECK(n.at(i, j) <= 1.0);
        CHECK(n.at(i, j) == n.at(j, i));
      }
  CHECK(n.at(0, 1) == 1.0);

  // Bonferroni multiplier against a hand-computed z
  const std::vector<std::vector<double>> g{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto m = dunn_posthoc(g);
  const double se = std::sqrt(9.0 * 10.0 / 12.0 * (1.0 / 3 + 1.0 / 3));
  const double z = (8.0 - 2.0) / se;
  CHECK(m.at(0, 2) == doctest::Approx(std::min(1.0, 3 * std::erfc(z / std::sqrt(2.0)))));

  // group order does not change the pairwise values
  const std::vector<std::vector<double>> perm{{7, 8, 9}, {1, 2, 3}, {4, 5, 6}};
  const auto mp = dunn_posthoc(perm);
  CHECK(mp.at(1, 0) == doctest::Approx(m.at(0, 2)));
  CHECK(mp.at(1, 2) == doctest::Approx(m.at(0, 1)));
}

TEST_CASE("stat test runs the post hoc only when significant") {
  const std::vector<std::vector<double>> g{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto sig = stat_test(g);
  CHECK(sig.posthoc_run);
  CHECK(sig.pairwise.k == 3);
  const std::vector<std::vector<double>> same{{1, 2, 3}, {1, 2, 3}};
  CHECK(!stat_test(same).posthoc_run);
}

TEST_CASE("summary statistics") {
  const std::vector<double> v{0.5, 0.5, 0.5, 0.5};
  const auto s = summarize(v);
  CHECK(s.median == 0.5);
  CHECK(s.mean == 0.5);
  CHECK(s.stddev == 0.0);
  const std::vector<double> w{4, 1, 3, 2};
  const auto t = summarize(w);
  CHECK(t.n == 4);
  CHECK(t.median == 2.5);
  CHECK(t.mean == 2.5);
  CHECK(t.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(t.min == 1);
  CHECK(t.max == 4);
}
