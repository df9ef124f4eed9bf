#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "xdv/error.hpp"
#include "xdv/evalstats.hpp"

namespace xdv {
namespace {

struct RankedPool {
  std::vector<double> mean_rank;  // per group
  std::vector<std::size_t> sizes;
  std::size_t n = 0;
  double tie_sum = 0.0;  // sum over tie blocks of t^3 - t
};

RankedPool rank_groups(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) fail(ErrorKind::InvalidArgument, "rank tests need at least two groups");
  struct Entry {
    double value;
    std::size_t group;
  };
  std::vector<Entry> pool;
  RankedPool out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) fail(ErrorKind::InvalidArgument, "group " + std::to_string(g) + " is empty");
    for (double v : groups[g]) {
      if (std::isnan(v)) fail(ErrorKind::NonFinite, "rank tests do not accept NaN");
      pool.push_back({v, g});
    }
    out.sizes.push_back(groups[g].size());
  }
  std::sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
  out.n = pool.size();
  std::vector<double> rank_sum(groups.size(), 0.0);
  std::size_t i = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    while (j < pool.size() && pool[j].value == pool[i].value) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const auto t = static_cast<double>(j - i);
    out.tie_sum += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) rank_sum[pool[k].group] += midrank;
    i = j;
  }
  for (std::size_t g = 0; g < groups.size(); ++g)
    out.mean_rank.push_back(rank_sum[g] / static_cast<double>(out.sizes[g]));
  return out;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::InvalidArgument, "normal_quantile needs p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double chi2_sf(double x, double df) {
  if (!(df > 0.0)) fail(ErrorKind::InvalidArgument, "chi-square needs positive degrees of freedom");
  if (std::isnan(x)) fail(ErrorKind::NonFinite, "chi2_sf of NaN");
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

KruskalWallisResult kruskal_wallis(std::span<const std::vector<double>> groups) {
  const RankedPool r = rank_groups(groups);
  const auto n = static_cast<double>(r.n);
  const double correction = 1.0 - r.tie_sum / (n * n * n - n);
  if (!(correction > 0.0)) return {0.0, 1.0};  // every observation identical
  double h = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double ni = static_cast<double>(r.sizes[g]);
    const double rank_total = r.mean_rank[g] * ni;
    h += rank_total * rank_total / ni;
  }
  h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
  h = std::max(0.0, h / correction);
  return {h, chi2_sf(h, static_cast<double>(groups.size() - 1))};
}

DunnMatrix dunn_posthoc(std::span<const std::vector<double>> groups) {
  const RankedPool r = rank_groups(groups);
  const auto n = static_cast<double>(r.n);
  DunnMatrix m;
  m.k = groups.size();
  m.p.assign(m.k * m.k, std::numeric_limits<double>::quiet_NaN());
  const double comparisons = static_cast<double>(m.comparisons());
  const double spread = n * (n + 1.0) / 12.0 - r.tie_sum / (12.0 * (n - 1.0));
  for (std::size_t i = 0; i < m.k; ++i) {
    for (std::size_t j = i + 1; j < m.k; ++j) {
      const double se = std::sqrt(spread * (1.0 / static_cast<double>(r.sizes[i]) + 1.0 / static_cast<double>(r.sizes[j])));
      double p = 1.0;
      if (se > 0.0) {
        const double z = (r.mean_rank[i] - r.mean_rank[j]) / se;
        p = std::erfc(std::abs(z) / std::numbers::sqrt2);  // 2 (1 - Phi(|z|))
      }
      p = std::min(1.0, p * comparisons);
      m.p[i * m.k + j] = m.p[j * m.k + i] = p;
    }
  }
  return m;
}

StatTestReport stat_test(std::span<const std::vector<double>> groups, double alpha) {
  StatTestReport report;
  const auto kw = kruskal_wallis(groups);
  report.h_statistic = kw.h;
  report.kw_pvalue = kw.p;
  if (kw.p <= alpha) {
    report.posthoc_run = true;
    report.pairwise = dunn_posthoc(groups);
  }
  return report;
}

}  // namespace xdv
