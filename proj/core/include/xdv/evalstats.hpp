#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace xdv {

// One verification trial. Higher scores mean "more likely genuine"; a trial
// is accepted when score >= tau.
struct ScoredPair {
  double score = 0.0;
  bool genuine = false;

  bool operator==(const ScoredPair&) const = default;
};

using PairScoreSet = std::vector<ScoredPair>;

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

struct ThresholdReport {
  double tau = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double hter = 0.0;
};

ConfusionCounts confusion_at(std::span<const ScoredPair> scores, double tau);

// hter = (far + frr) / 2.
ThresholdReport make_report(double tau, double far, double frr);

// FAR = FP/(FP+TN), FRR = FN/(FN+TP). Throws InsufficientData when either
// class is missing.
ThresholdReport rates_at(std::span<const ScoredPair> scores, double tau);

// Candidate thresholds are -inf, the midpoints between consecutive distinct
// scores, and +inf. Picks the one minimizing |FAR-FRR|, then FAR+FRR, then
// tau; the reported EER is (FAR+FRR)/2 at that threshold.
ThresholdReport eer_threshold(std::span<const ScoredPair> scores);

struct DetPoint {
  double tau = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double probit_far = 0.0;
  double probit_frr = 0.0;
};

// One point per candidate threshold in increasing tau (FAR non-increasing,
// FRR non-decreasing). Probit coordinates use rates clamped to
// [1/(2n), 1 - 1/(2n)] with n the impostor (FAR) or genuine (FRR) count.
std::vector<DetPoint> det_points(std::span<const ScoredPair> scores);

// CSV with header tau,far,frr,probit_far,probit_frr.
std::string det_csv(std::span<const DetPoint> points);

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

double normal_cdf(double x);
// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);
// Survival function of the chi-square distribution with df degrees of freedom.
double chi2_sf(double x, double df);

// ---------------------------------------------------------------------------
// Rank tests
// ---------------------------------------------------------------------------

struct KruskalWallisResult {
  double h = 0.0;  // tie-corrected
  double p = 1.0;
};

// Throws InvalidArgument for fewer than two groups or an empty group.
KruskalWallisResult kruskal_wallis(std::span<const std::vector<double>> groups);

// Symmetric k x k matrix of Bonferroni-adjusted two-sided Dunn p-values,
// capped at 1. The diagonal is NaN (no self comparison).
struct DunnMatrix {
  std::size_t k = 0;
  std::vector<double> p;

  double at(std::size_t i, std::size_t j) const { return p[i * k + j]; }
  std::size_t comparisons() const noexcept { return k * (k - 1) / 2; }
};

DunnMatrix dunn_posthoc(std::span<const std::vector<double>> groups);

struct StatTestReport {
  double h_statistic = 0.0;
  double kw_pvalue = 1.0;
  bool posthoc_run = false;
  DunnMatrix pairwise;
};

// Kruskal-Wallis, followed by Dunn/Bonferroni when p <= alpha.
StatTestReport stat_test(std::span<const std::vector<double>> groups, double alpha = 0.05);

// ---------------------------------------------------------------------------
// Descriptive statistics
// ---------------------------------------------------------------------------

struct SummaryStats {
  std::size_t n = 0;
  double median = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1) standard deviation
  double min = 0.0;
  double max = 0.0;
};

SummaryStats summarize(std::span<const double> values);

}  // namespace xdv
