#include <algorithm>
#include <cmath>
#include <numeric>

#include "classify_internal.hpp"
#include "xdv/error.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

double penalty_value(const LogRegProblem& p, const Eigen::VectorXd& w) {
  return p.penalty == Penalty::L2 ? 0.5 * p.inv_c * w.squaredNorm() : p.inv_c * w.lpNorm<1>();
}

double loss_at(const LogRegProblem& p, const Eigen::VectorXd& z) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) f += p.sample_weight[i] * softplus(-p.y[i] * z[i]);
  return f;
}

// d loss / d z_i
Eigen::VectorXd loss_slopes(const LogRegProblem& p, const Eigen::VectorXd& z) {
  Eigen::VectorXd s(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) s[i] = -p.sample_weight[i] * p.y[i] * sigmoid(-p.y[i] * z[i]);
  return s;
}

Eigen::VectorXd loss_curvatures(const LogRegProblem& p, const Eigen::VectorXd& z) {
  Eigen::VectorXd h(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double q = sigmoid(z[i]);
    h[i] = p.sample_weight[i] * q * (1.0 - q);
  }
  return h;
}

struct FitState {
  Eigen::VectorXd w;
  double b = 0.0;
  long iterations = 0;
  bool converged = false;
};

// Inexact Newton with conjugate-gradient inner solves and Armijo backtracking.
FitState newton_cg(const LogRegProblem& p, double tolerance, long max_iterations) {
  const Eigen::MatrixXd& x = *p.x;
  const Eigen::Index d = x.cols();
  FitState st;
  st.w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(x.rows());
  Eigen::VectorXd g = logreg_gradient(p, st.w, st.b);
  const double target = tolerance * std::max(1.0, g.norm());
  double f = loss_at(p, z) + penalty_value(p, st.w);

  while (true) {
    const double gnorm = g.norm();
    if (gnorm <= target) {
      st.converged = true;
      break;
    }
    if (st.iterations >= max_iterations) break;
    ++st.iterations;

    const Eigen::VectorXd curv = loss_curvatures(p, z);
    const auto hess_times = [&](const Eigen::VectorXd& v) {
      const Eigen::VectorXd xv = (x * v.head(d)).array() + v[d];
      const Eigen::VectorXd dxv = curv.cwiseProduct(xv);
      Eigen::VectorXd out(d + 1);
      out.head(d) = x.transpose() * dxv + p.inv_c * v.head(d);
      out[d] = dxv.sum() + 1e-12 * v[d];
      return out;
    };
    Eigen::VectorXd step = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd r = -g, dir = r;
    double rr = r.squaredNorm();
    const double cg_target = std::min(0.5, std::sqrt(gnorm)) * gnorm;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(d + 1, 250); ++k) {
      const Eigen::VectorXd hd = hess_times(dir);
      const double curvature = dir.dot(hd);
      if (!(curvature > 0.0)) break;
      const double a = rr / curvature;
      step += a * dir;
      r -= a * hd;
      const double rr_new = r.squaredNorm();
      if (std::sqrt(rr_new) <= cg_target) break;
      dir = r + (rr_new / rr) * dir;
      rr = rr_new;
    }
    if (step.squaredNorm() == 0.0) step = -g;

    const double slope = g.dot(step);
    const Eigen::VectorXd dz = (x * step.head(d)).array() + step[d];
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const Eigen::VectorXd w_try = st.w + t * step.head(d);
      const Eigen::VectorXd z_try = z + t * dz;
      const double f_try = loss_at(p, z_try) + penalty_value(p, w_try);
      if (f_try <= f + 1e-4 * t * slope) {
        st.w = w_try;
        st.b += t * step[d];
        z = z_try;
        f = f_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    g = logreg_gradient(p, st.w, st.b);
  }
  return st;
}

// Minimum-norm subgradient of the L1 objective; last entry is the bias.
Eigen::VectorXd l1_subgradient(const LogRegProblem& p, const Eigen::VectorXd& w, double b) {
  Eigen::VectorXd g = logreg_gradient(p, w, b);
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double smooth = g[j] - p.inv_c * sign(w[j]);
    if (w[j] != 0.0) g[j] = smooth + p.inv_c * sign(w[j]);
    else g[j] = sign(smooth) * std::max(std::abs(smooth) - p.inv_c, 0.0);
  }
  return g;
}

// Proximal Newton: each outer step minimizes the second-order model of the
// loss plus the L1 term by coordinate descent (coordinates in a seeded order,
// bias last and unpenalized), followed by a backtracking line search.
FitState proximal_newton_l1(const LogRegProblem& p, std::uint64_t seed, double tolerance, long max_iterations) {
  const Eigen::MatrixXd& x = *p.x;
  const Eigen::Index n = x.rows(), d = x.cols();
  const double lambda = p.inv_c;
  constexpr double kNu = 1e-12;
  FitState st;
  st.w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  const double target = tolerance * std::max(1.0, l1_subgradient(p, st.w, st.b).norm());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  double f = loss_at(p, z);
  double inner_scale = 0.5;

  while (true) {
    const Eigen::VectorXd sub = l1_subgradient(p, st.w, st.b);
    if (sub.norm() <= target) {
      st.converged = true;
      break;
    }
    if (st.iterations >= max_iterations) break;
    ++st.iterations;

    const Eigen::VectorXd slope = loss_slopes(p, z), curv = loss_curvatures(p, z);
    const Eigen::VectorXd grad = x.transpose() * slope;
    const double grad_b = slope.sum();

    // Zero coordinates strictly inside the subgradient band sit out this step.
    std::vector<Eigen::Index> active;
    for (const Eigen::Index j : order)
      if (st.w[j] != 0.0 || std::abs(grad[j]) > lambda * (1.0 - 1e-3)) active.push_back(j);
    rng.shuffle(std::span<Eigen::Index>(active));
    Eigen::VectorXd hdiag = Eigen::VectorXd::Constant(d, kNu);
    for (const Eigen::Index j : active) hdiag[j] += x.col(j).cwiseAbs2().dot(curv);
    const double hdiag_b = curv.sum() + kNu;

    Eigen::VectorXd step = Eigen::VectorXd::Zero(d);
    double step_b = 0.0;
    Eigen::VectorXd xd = Eigen::VectorXd::Zero(n);  // X step + step_b
    const double outer_violation = sub.lpNorm<1>();
    int passes = 0;
    for (; passes < 100; ++passes) {
      double violation = 0.0;
      for (const Eigen::Index j : active) {
        const auto col = x.col(j);
        const double g = grad[j] + col.dot(curv.cwiseProduct(xd)) + kNu * step[j];
        const double h = hdiag[j];
        const double wj = st.w[j] + step[j];
        double delta;
        if (g + lambda <= h * wj) delta = -(g + lambda) / h;
        else if (g - lambda >= h * wj) delta = -(g - lambda) / h;
        else delta = -wj;
        // minimum-norm subgradient of the model at the current coordinate
        const double v = wj > 0.0 ? g + lambda : wj < 0.0 ? g - lambda : std::max(std::abs(g) - lambda, 0.0);
        violation += std::abs(v);
        if (delta == 0.0) continue;
        step[j] += delta;
        xd += delta * col;
      }
      {
        const double g = grad_b + curv.dot(xd) + kNu * step_b;
        const double delta = -g / hdiag_b;
        violation += std::abs(g);
        step_b += delta;
        xd.array() += delta;
      }
      if (violation <= inner_scale * outer_violation) break;
    }
    if (passes == 0) inner_scale *= 0.25;

    const double l1_now = st.w.lpNorm<1>();
    const double decrease = grad.dot(step) + grad_b * step_b + lambda * ((st.w + step).lpNorm<1>() - l1_now);
    double beta = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, beta *= 0.5) {
      const Eigen::VectorXd z_try = z + beta * xd;
      const double f_try = loss_at(p, z_try);
      const double l1_try = (st.w + beta * step).lpNorm<1>();
      if (f_try - f + lambda * (l1_try - l1_now) <= 0.01 * beta * decrease) {
        st.w += beta * step;
        st.b += beta * step_b;
        z = z_try;
        f = f_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return st;
}

}  // namespace

double logreg_objective(const LogRegProblem& p, const Eigen::VectorXd& w, double b) {
  const Eigen::VectorXd z = (*p.x * w).array() + b;
  return loss_at(p, z) + penalty_value(p, w);
}

Eigen::VectorXd logreg_gradient(const LogRegProblem& p, const Eigen::VectorXd& w, double b) {
  const Eigen::MatrixXd& x = *p.x;
  const Eigen::VectorXd z = (x * w).array() + b;
  const Eigen::VectorXd s = loss_slopes(p, z);
  Eigen::VectorXd g(w.size() + 1);
  g.head(w.size()) = x.transpose() * s;
  if (p.penalty == Penalty::L2) g.head(w.size()) += p.inv_c * w;
  else
    for (Eigen::Index j = 0; j < w.size(); ++j) g[j] += p.inv_c * sign(w[j]);
  g[w.size()] = s.sum();
  return g;
}

namespace detail {

TrainedModel fit_logreg(const TrainingSet& data, const HyperParams& hp, std::uint64_t seed,
                        const SolverOptions& options) {
  LogRegProblem p;
  p.x = &data.x;
  p.y = data.y;
  p.sample_weight = class_weights(data.y, hp.class_weight);
  p.inv_c = 1.0 / hp.c();
  p.penalty = hp.penalty;
  const FitState st = hp.penalty == Penalty::L2
                          ? newton_cg(p, options.lr_tolerance, options.lr_max_iterations)
                          : proximal_newton_l1(p, seed, options.lr_tolerance, options.lr_max_iterations);
  TrainedModel m;
  m.kind = ClassifierKind::LogReg;
  m.hp = hp;
  m.dim = static_cast<std::size_t>(data.x.cols());
  m.w = st.w;
  m.b = st.b;
  m.converged = st.converged;
  m.iterations = st.iterations;
  return m;
}

}  // namespace detail
}  // namespace xdv
