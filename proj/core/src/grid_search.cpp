#include <algorithm>
#include <limits>
#include <optional>

#include "classify_internal.hpp"
#include "xdv/error.hpp"
#include "xdv/evalstats.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

std::vector<ScoredPair> scored(const Eigen::VectorXd& s, std::span<const int> y) {
  std::vector<ScoredPair> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = {s[static_cast<Eigen::Index>(i)], y[i] == 1};
  return out;
}

// Kernel matrices computed once per fold and reused across grid points.
struct FoldCache {
  Eigen::MatrixXd train_kernel;  // Gram or squared distances
  Eigen::MatrixXd cross_kernel;  // test x train
};

Eigen::VectorXd dual_scores(const DualSolution& sol, std::span<const int> y, const Eigen::MatrixXd& cross) {
  Eigen::VectorXd coef(sol.alpha.size());
  for (Eigen::Index i = 0; i < coef.size(); ++i) coef[i] = sol.alpha[i] * y[static_cast<std::size_t>(i)];
  return (cross * coef).array() - sol.rho;
}

}  // namespace

GridSpec GridSpec::with_stride(int stride) {
  if (stride < 1) fail(ErrorKind::InvalidArgument, "grid stride must be positive");
  GridSpec g;
  for (int e = -25; e <= 10; e += stride) g.c_exps.push_back(e);
  g.gamma_exps = g.c_exps;
  return g;
}

std::vector<HyperParams> GridSpec::points(ClassifierKind kind) const {
  std::vector<HyperParams> out;
  if (is_baseline(kind)) return {HyperParams{}};
  const std::vector<int> gammas = kind == ClassifierKind::RbfSvm ? gamma_exps : std::vector<int>{0};
  const std::vector<Penalty> pens = kind == ClassifierKind::LogReg ? penalties : std::vector<Penalty>{Penalty::L2};
  for (int c : c_exps)
    for (int g : gammas)
      for (Penalty p : pens)
        for (ClassWeight w : weights) out.push_back({c, g, p, w});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

GridResult grid_search(ClassifierKind kind, std::span<const CvFold> folds, const GridSpec& grid, std::uint64_t seed,
                       const SolverOptions& options) {
  if (folds.empty()) fail(ErrorKind::InvalidArgument, "grid search needs at least one fold");
  const std::vector<HyperParams> points = grid.points(kind);
  if (points.empty()) fail(ErrorKind::InvalidArgument, "grid search over an empty grid");

  std::vector<FoldCache> cache(folds.size());
  std::optional<Error> fold_error;  // makes every point fail
  if (kind == ClassifierKind::LinearSvm || kind == ClassifierKind::RbfSvm) {
    for (std::size_t f = 0; f < folds.size() && !fold_error; ++f) {
      try {
        detail::check_training_set(folds[f].train);
      } catch (const Error& e) {
        fold_error = e;
        break;
      }
      const auto& tr = folds[f].train.x;
      const auto& te = folds[f].test.x;
      if (kind == ClassifierKind::LinearSvm) {
        cache[f].train_kernel = tr * tr.transpose();
        cache[f].cross_kernel = te * tr.transpose();
      } else {
        cache[f].train_kernel = detail::squared_distances(tr, tr);
        cache[f].cross_kernel = detail::squared_distances(te, tr);
      }
    }
  }

  GridResult result;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const HyperParams& hp = points[p];
    GridPointResult pr{hp, 0.0, false, {}};
    try {
      if (fold_error) throw *fold_error;
      double total = 0.0;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const CvFold& fold = folds[f];
        Eigen::VectorXd s;
        if (kind == ClassifierKind::LinearSvm) {
          const DualSolution sol = detail::svm_dual_for(fold.train, cache[f].train_kernel, hp, options);
          s = dual_scores(sol, fold.train.y, cache[f].cross_kernel);
        } else if (kind == ClassifierKind::RbfSvm) {
          const Eigen::MatrixXd k = (-hp.gamma() * cache[f].train_kernel).array().exp();
          const Eigen::MatrixXd kc = (-hp.gamma() * cache[f].cross_kernel).array().exp();
          const DualSolution sol = detail::svm_dual_for(fold.train, k, hp, options);
          s = dual_scores(sol, fold.train.y, kc);
        } else {
          const TrainedModel m = train(kind, fold.train, hp, derive_seed(seed, p * folds.size() + f), options);
          s = score_rows(m, fold.test.x);
        }
        if (!s.allFinite()) fail(ErrorKind::NonFinite, "non-finite validation scores");
        total += eer_threshold(scored(s, fold.test.y)).hter;
      }
      pr.mean_eer = total / static_cast<double>(folds.size());
      if (pr.mean_eer < best) {
        best = pr.mean_eer;
        result.best = hp;
        any = true;
      }
    } catch (const Error& e) {
      pr.failed = true;
      pr.error = e.what();
    }
    result.points.push_back(std::move(pr));
  }
  if (!any) {
    std::string msg = "all " + std::to_string(points.size()) + " grid points failed";
    if (!result.points.empty()) msg += "; first error: " + result.points.front().error;
    fail(ErrorKind::AllGridPointsFailed, msg);
  }
  result.mean_cv_eer = best;
  return result;
}

}  // namespace xdv
