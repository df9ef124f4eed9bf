#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "xdv/error.hpp"
#include "xdv/evalstats.hpp"

namespace xdv {
namespace {

struct ClassCounts {
  std::size_t genuine = 0, impostor = 0;
};

ClassCounts count_classes(std::span<const ScoredPair> scores) {
  ClassCounts c;
  for (const auto& s : scores) {
    if (std::isnan(s.score))
      fail(ErrorKind::NonFinite, "score set contains NaN");
    (s.genuine ? c.genuine : c.impostor) += 1;
  }
  if (c.genuine == 0 || c.impostor == 0)
    fail(ErrorKind::InsufficientData, "score set needs at least one genuine and one impostor trial");
  return c;
}

// Operating point after accepting every score >= tau, expressed through the
// counts of rejected genuines and accepted impostors.
struct Sweep {
  double tau;
  std::size_t fn;
  std::size_t fp;
};

// Candidate thresholds in increasing order with their error counts.
std::vector<Sweep> sweep(std::span<const ScoredPair> scores) {
  std::vector<ScoredPair> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  std::size_t impostors = 0;
  for (const auto& s : sorted) impostors += s.genuine ? 0 : 1;

  std::vector<Sweep> out;
  const double inf = std::numeric_limits<double>::infinity();
  std::size_t fn = 0, fp = impostors;
  out.push_back({-inf, fn, fp});
  std::size_t i = 0;
  while (i < sorted.size()) {
    // Move every trial with this score value to the rejected side.
    const double v = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == v) {
      if (sorted[i].genuine) ++fn;
      else --fp;
      ++i;
    }
    const double tau = i < sorted.size() ? v + (sorted[i].score - v) / 2.0 : inf;
    out.push_back({tau, fn, fp});
  }
  return out;
}

}  // namespace

ConfusionCounts confusion_at(std::span<const ScoredPair> scores, double tau) {
  ConfusionCounts c;
  for (const auto& s : scores) {
    const bool accept = s.score >= tau;
    if (s.genuine) (accept ? c.tp : c.fn) += 1;
    else (accept ? c.fp : c.tn) += 1;
  }
  return c;
}

ThresholdReport make_report(double tau, double far, double frr) {
  return {tau, far, frr, (far + frr) / 2.0};
}

ThresholdReport rates_at(std::span<const ScoredPair> scores, double tau) {
  count_classes(scores);
  const auto c = confusion_at(scores, tau);
  return make_report(tau, static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn),
                     static_cast<double>(c.fn) / static_cast<double>(c.fn + c.tp));
}

ThresholdReport eer_threshold(std::span<const ScoredPair> scores) {
  const ClassCounts n = count_classes(scores);
  const auto points = sweep(scores);
  // Exact integer comparison: FAR - FRR = (fp*G - fn*I) / (G*I).
  const auto g = static_cast<long double>(n.genuine), im = static_cast<long double>(n.impostor);
  std::size_t best = 0;
  long double best_gap = 0, best_sum = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const long double a = static_cast<long double>(points[k].fp) * g;
    const long double b = static_cast<long double>(points[k].fn) * im;
    const long double gap = a > b ? a - b : b - a;
    const long double sum = a + b;
    if (k == 0 || gap < best_gap || (gap == best_gap && sum < best_sum)) {
      best = k;
      best_gap = gap;
      best_sum = sum;
    }
  }
  const auto& p = points[best];
  return make_report(p.tau, static_cast<double>(p.fp) / static_cast<double>(n.impostor),
                     static_cast<double>(p.fn) / static_cast<double>(n.genuine));
}

std::vector<DetPoint> det_points(std::span<const ScoredPair> scores) {
  const ClassCounts n = count_classes(scores);
  const double far_lo = 1.0 / (2.0 * static_cast<double>(n.impostor));
  const double frr_lo = 1.0 / (2.0 * static_cast<double>(n.genuine));
  std::vector<DetPoint> out;
  for (const auto& s : sweep(scores)) {
    DetPoint d;
    d.tau = s.tau;
    d.far = static_cast<double>(s.fp) / static_cast<double>(n.impostor);
    d.frr = static_cast<double>(s.fn) / static_cast<double>(n.genuine);
    d.probit_far = normal_quantile(std::clamp(d.far, far_lo, 1.0 - far_lo));
    d.probit_frr = normal_quantile(std::clamp(d.frr, frr_lo, 1.0 - frr_lo));
    out.push_back(d);
  }
  return out;
}

std::string det_csv(std::span<const DetPoint> points) {
  std::string out = "tau,far,frr,probit_far,probit_frr\n";
  char line[160];
  for (const auto& p : points) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n", p.tau, p.far, p.frr, p.probit_far,
                  p.probit_frr);
    out += line;
  }
  return out;
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::InsufficientData, "summary of an empty sample");
  SummaryStats s;
  s.n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = s.n / 2;
  s.median = s.n % 2 == 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double sq = 0.0;
  for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
  s.stddev = s.n > 1 ? std::sqrt(sq / static_cast<double>(s.n - 1)) : 0.0;
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

}  // namespace xdv
