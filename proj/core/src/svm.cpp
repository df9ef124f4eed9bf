#include <algorithm>
#include <cmath>
#include <limits>

#include "classify_internal.hpp"
#include "xdv/error.hpp"

namespace xdv {
namespace {

constexpr double kTau = 1e-12;

}  // namespace

// Sequential minimal optimization with second-order working-set selection
// over a precomputed kernel. No shrinking; the visitation is deterministic.
DualSolution solve_svm_dual(const Eigen::MatrixXd& kernel, std::span<const int> y, std::span<const double> c,
                            double tolerance, long max_iterations) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (kernel.rows() != n || kernel.cols() != n || static_cast<Eigen::Index>(c.size()) != n)
    fail(ErrorKind::DimensionMismatch, "svm dual: kernel, labels and costs disagree in size");
  DualSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  auto& alpha = sol.alpha;
  const auto upper = [&](Eigen::Index t) { return alpha[t] >= c[t]; };
  const auto lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

  for (;;) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (!upper(t) && -grad[t] >= gmax) gmax = -grad[t], i = t;
      } else {
        if (!lower(t) && grad[t] >= gmax) gmax = grad[t], i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    if (i >= 0) {
      for (Eigen::Index t = 0; t < n; ++t) {
        double grad_diff = 0.0;
        if (y[t] == 1) {
          if (lower(t)) continue;
          grad_diff = gmax + grad[t];
          gmax2 = std::max(gmax2, grad[t]);
        } else {
          if (upper(t)) continue;
          grad_diff = gmax - grad[t];
          gmax2 = std::max(gmax2, -grad[t]);
        }
        if (grad_diff > 0.0) {
          const double quad = std::max(kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t), kTau);
          const double obj = -grad_diff * grad_diff / quad;
          if (obj <= best_obj) best_obj = obj, j = t;
        }
      }
    }
    sol.kkt_gap = (i >= 0) ? gmax + gmax2 : 0.0;
    if (i < 0 || j < 0 || sol.kkt_gap < tolerance) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= max_iterations) break;
    ++sol.iterations;

    const double ci = c[i], cj = c[j];
    const double old_i = alpha[i], old_j = alpha[j];
    const double quad = std::max(kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j), kTau);
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = diff;
      } else {
        if (alpha[i] < 0.0) alpha[i] = 0.0, alpha[j] = -diff;
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) alpha[i] = ci, alpha[j] = ci - diff;
      } else {
        if (alpha[j] > cj) alpha[j] = cj, alpha[i] = cj + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) alpha[i] = ci, alpha[j] = sum - ci;
      } else {
        if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = sum;
      }
      if (sum > cj) {
        if (alpha[j] > cj) alpha[j] = cj, alpha[i] = sum - cj;
      } else {
        if (alpha[i] < 0.0) alpha[i] = 0.0, alpha[j] = sum;
      }
    }
    // Q_tk = y_t y_k K_tk
    const double di = (alpha[i] - old_i) * y[i], dj = (alpha[j] - old_j) * y[j];
    for (Eigen::Index t = 0; t < n; ++t) grad[t] += y[t] * (kernel(t, i) * di + kernel(t, j) * dj);
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  long free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  sol.rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
  if (!std::isfinite(sol.rho)) sol.rho = 0.0;
  return sol;
}

namespace detail {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * (a * b.transpose());
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

DualSolution svm_dual_for(const TrainingSet& data, const Eigen::MatrixXd& kernel, const HyperParams& hp,
                          const SolverOptions& options) {
  std::vector<double> cost = class_weights(data.y, hp.class_weight);
  for (double& v : cost) v *= hp.c();
  return solve_svm_dual(kernel, data.y, cost, options.svm_tolerance, options.svm_max_iterations);
}

}  // namespace detail
}  // namespace xdv
