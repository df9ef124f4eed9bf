#include <doctest.h>

#include <cmath>
#include <limits>

#include "xdv/classify.hpp"
#include "xdv/error.hpp"
#include "xdv/evalstats.hpp"
#include "xdv/rng.hpp"

using namespace xdv;

namespace {

TrainingSet make_set(std::initializer_list<std::pair<std::array<double, 2>, int>> rows) {
  TrainingSet t;
  t.x.resize(static_cast<Eigen::Index>(rows.size()), 2);
  Eigen::Index i = 0;
  for (const auto& [p, y] : rows) {
    t.x(i, 0) = p[0];
    t.x(i, 1) = p[1];
    t.y.push_back(y);
    ++i;
  }
  return t;
}

double accuracy(const TrainedModel& m, const TrainingSet& t) {
  const Eigen::VectorXd s = score_rows(m, t.x);
  int ok = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) ok += (s[i] > 0) == (t.y[static_cast<std::size_t>(i)] > 0);
  return ok / static_cast<double>(s.size());
}

TrainingSet gaussian_blobs(std::size_t n, std::size_t d, double sep, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet t;
  t.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 4 == 0 ? 1 : -1;
    t.y.push_back(y);
    for (std::size_t j = 0; j < d; ++j)
      t.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal() + (j == 0 ? sep * y : 0.0);
  }
  return t;
}

// Exhaustive active-set enumeration of the box-constrained dual with one
// equality constraint. Each index is at 0, at C or free; the free block is
// solved from its KKT system and the feasible candidate of least objective
// wins.
Eigen::VectorXd brute_force_dual(const Eigen::MatrixXd& k, const std::vector<int>& y, double c) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) q(i, j) = y[i] * y[j] * k(i, j);
  auto objective = [&](const Eigen::VectorXd& a) { return 0.5 * a.dot(q * a) - a.sum(); };

  Eigen::VectorXd best;
  double best_obj = std::numeric_limits<double>::infinity();
  int states = 1;
  for (int i = 0; i < n; ++i) states *= 3;
  for (int code = 0; code < states; ++code) {
    std::vector<int> state(n);
    for (int i = 0, r = code; i < n; ++i, r /= 3) state[i] = r % 3;  // 0: zero, 1: upper, 2: free
    std::vector<int> free;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 1) a[i] = c;
      if (state[i] == 2) free.push_back(i);
    }
    const int m = static_cast<int>(free.size());
    if (m > 0) {
      // [Q_ff y_f; y_f' 0] [a_f; nu] = [1 - Q_fb a_b; -y_b' a_b]
      Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs(m + 1);
      double yb = 0;
      for (int i = 0; i < n; ++i) yb += y[i] * a[i];
      for (int r = 0; r < m; ++r) {
        double fixed = 0;
        for (int i = 0; i < n; ++i) fixed += q(free[r], i) * a[i];
        rhs[r] = 1.0 - fixed;
        for (int s = 0; s < m; ++s) sys(r, s) = q(free[r], free[s]);
        sys(r, m) = y[free[r]];
        sys(m, r) = y[free[r]];
      }
      rhs[m] = -yb;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
      if (lu.rank() < m + 1) continue;
      const Eigen::VectorXd sol = lu.solve(rhs);
      for (int r = 0; r < m; ++r) a[free[r]] = sol[r];
    }
    double eq = 0;
    bool feasible = true;
    for (int i = 0; i < n; ++i) {
      eq += y[i] * a[i];
      feasible = feasible && a[i] >= -1e-12 && a[i] <= c + 1e-12;
    }
    if (!feasible || std::abs(eq) > 1e-9) continue;
    const double obj = objective(a);
    if (obj < best_obj) {
      best_obj = obj;
      best = a;
    }
  }
  return best;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_CASE("tags") {
  CHECK(classifier_of("linsvm") == ClassifierKind::LinearSvm);
  CHECK(classifier_of("rbfsvm") == ClassifierKind::RbfSvm);
  CHECK(classifier_of("lr") == ClassifierKind::LogReg);
  CHECK(classifier_tag(ClassifierKind::Random) == "random");
  CHECK(is_baseline(ClassifierKind::AlwaysAccept));
  CHECK(!is_baseline(ClassifierKind::LogReg));
  CHECK(penalty_of("l1") == Penalty::L1);
  CHECK(class_weight_of("balanced") == ClassWeight::Balanced);
  HyperParams hp{3, -2, Penalty::L2, ClassWeight::Equal};
  CHECK(hp.c() == 8.0);
  CHECK(hp.gamma() == 0.25);
}

TEST_CASE("balanced class weights") {
  const std::vector<int> y{1, -1, -1, -1};
  const auto w = class_weights(y, ClassWeight::Balanced);
  CHECK(w[0] == doctest::Approx(2.0));
  CHECK(w[1] == doctest::Approx(4.0 / 6.0));
  // both classes carry equal total weight
  CHECK(w[0] == doctest::Approx(w[1] + w[2] + w[3]));
  for (double x : class_weights(y, ClassWeight::Equal)) CHECK(x == 1.0);
}

TEST_CASE("linear svm finds the symmetric max-margin plane") {
  const auto t = make_set({{{1, 1}, 1}, {{1, -1}, 1}, {{2, 0.5}, 1}, {{2, -0.5}, 1},
                           {{-1, 1}, -1}, {{-1, -1}, -1}, {{-2, 0.5}, -1}, {{-2, -0.5}, -1}});
  const auto m = train(ClassifierKind::LinearSvm, t, {10, 0}, 1);
  CHECK(accuracy(m, t) == 1.0);
  CHECK(std::abs(m.w[0] - 1.0) < 1e-3);
  CHECK(std::abs(m.w[1]) < 1e-3);
  CHECK(std::abs(m.b) < 1e-3);
  CHECK(m.converged);
}

TEST_CASE("linear svm matches the brute-force dual on six points") {
  const auto t = make_set({{{0.5, 1.0}, 1}, {{1.5, 0.2}, 1}, {{0.2, 0.1}, 1},
                           {{-0.3, -0.6}, -1}, {{0.4, -1.2}, -1}, {{0.6, 0.3}, -1}});
  for (int c_exp : {-2, 0, 3}) {
    const double c = std::ldexp(1.0, c_exp);
    const Eigen::MatrixXd k = t.x * t.x.transpose();
    const auto oracle = brute_force_dual(k, t.y, c);
    REQUIRE(oracle.size() == 6);

    const std::vector<double> box(6, c);
    const auto sol = solve_svm_dual(k, t.y, box, 1e-8, 100000);
    CHECK(sol.converged);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(sol.alpha[i] - oracle[i]) < 1e-3);

    const auto m = train(ClassifierKind::LinearSvm, t, {c_exp, 0}, 1);
    Eigen::Vector2d w = Eigen::Vector2d::Zero();
    for (int i = 0; i < 6; ++i) w += oracle[i] * t.y[static_cast<std::size_t>(i)] * t.x.row(i).transpose();
    CHECK(std::abs(m.w[0] - w[0]) < 1e-3);
    CHECK(std::abs(m.w[1] - w[1]) < 1e-3);
  }
}

TEST_CASE("svm kkt residuals are small at exit") {
  const auto t = gaussian_blobs(24, 2, 1.0, 3);
  const Eigen::MatrixXd k = t.x * t.x.transpose();
  const double c = 1.0;
  const std::vector<double> box(24, c);
  const auto sol = solve_svm_dual(k, t.y, box, 1e-4, 100000);
  CHECK(sol.converged);
  CHECK(sol.kkt_gap <= 1e-4);
  double eq = 0;
  for (int i = 0; i < 24; ++i) {
    const double yi = t.y[static_cast<std::size_t>(i)];
    eq += yi * sol.alpha[i];
    double f = -sol.rho;
    for (int j = 0; j < 24; ++j) f += sol.alpha[j] * t.y[static_cast<std::size_t>(j)] * k(i, j);
    const double margin = yi * f;
    if (sol.alpha[i] <= 0.0) CHECK(margin >= 1.0 - 1e-3);
    else if (sol.alpha[i] >= c) CHECK(margin <= 1.0 + 1e-3);
    else CHECK(std::abs(margin - 1.0) <= 1e-3);
    CHECK(sol.alpha[i] >= 0.0);
    CHECK(sol.alpha[i] <= c);
  }
  CHECK(std::abs(eq) < 1e-9);
}

TEST_CASE("svm reports non-convergence and still returns a solution") {
  const auto t = gaussian_blobs(60, 4, 0.5, 8);
  const Eigen::MatrixXd k = t.x * t.x.transpose();
  const std::vector<double> box(60, 16.0);
  const auto sol = solve_svm_dual(k, t.y, box, 1e-4, 5);
  CHECK(!sol.converged);
  CHECK(sol.iterations == 5);
  CHECK(sol.alpha.size() == 60);
  SolverOptions opt;
  opt.svm_max_iterations = 5;
  const auto m = train(ClassifierKind::LinearSvm, t, {4, 0}, 1, opt);
  CHECK(!m.converged);
  CHECK(m.w.size() == 4);
}

TEST_CASE("rbf svm solves xor where a linear model cannot") {
  TrainingSet t;
  t.x.resize(16, 2);
  Rng rng(1);
  for (int i = 0; i < 16; ++i) {
    const int a = i & 1, b = (i >> 1) & 1;
    t.x(i, 0) = a + 0.05 * rng.normal();
    t.x(i, 1) = b + 0.05 * rng.normal();
    t.y.push_back(a == b ? 1 : -1);
  }
  const auto rbf = train(ClassifierKind::RbfSvm, t, {10, 0}, 1);
  CHECK(accuracy(rbf, t) == 1.0);
  const auto lin = train(ClassifierKind::LinearSvm, t, {10, 0}, 1);
  CHECK(accuracy(lin, t) <= 0.75);
}

TEST_CASE("logistic gradient matches central differences") {
  Rng rng(11);
  Eigen::MatrixXd x(40, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  LogRegProblem p;
  p.x = &x;
  for (int i = 0; i < 40; ++i) {
    p.y.push_back(i % 4 == 0 ? 1 : -1);
    p.sample_weight.push_back(i % 4 == 0 ? 1.5 : 0.5);
  }
  p.inv_c = 0.7;
  Eigen::VectorXd w(5);
  w << 0.3, -0.8, 1.1, 0.45, -0.2;  // no zero entries so the L1 term is smooth
  const double b = 0.15;
  for (Penalty pen : {Penalty::L2, Penalty::L1}) {
    p.penalty = pen;
    const auto g = logreg_gradient(p, w, b);
    REQUIRE(g.size() == 6);
    const double h = 1e-6;
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd wp = w, wm = w;
      double bp = b, bm = b;
      if (j < 5) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd = (logreg_objective(p, wp, bp) - logreg_objective(p, wm, bm)) / (2 * h);
      CHECK(relative_error(g[j], fd) < 1e-5);
    }
  }
}

TEST_CASE("logistic regression reaches a stationary point") {
  const auto t = gaussian_blobs(120, 8, 1.0, 9);
  for (Penalty pen : {Penalty::L2, Penalty::L1}) {
    const HyperParams hp{0, 0, pen, ClassWeight::Balanced};
    const auto m = train(ClassifierKind::LogReg, t, hp, 4);
    CHECK(m.converged);
    LogRegProblem p;
    p.x = &t.x;
    p.y = t.y;
    p.sample_weight = class_weights(t.y, hp.class_weight);
    p.inv_c = 1.0 / hp.c();
    p.penalty = pen;
    const double f0 = logreg_objective(p, m.w, m.b);
    // no coordinate move lowers the objective
    for (Eigen::Index j = 0; j <= m.w.size(); ++j)
      for (double step : {1e-3, -1e-3}) {
        Eigen::VectorXd w = m.w;
        double b = m.b;
        if (j < m.w.size()) w[j] += step;
        else b += step;
        CHECK(logreg_objective(p, w, b) >= f0 - 1e-7);
      }
    CHECK(accuracy(m, t) > 0.8);
  }
}

TEST_CASE("l1 logistic regression zeroes noise features under strong penalty") {
  const auto t = gaussian_blobs(150, 10, 2.0, 21);
  const auto m = train(ClassifierKind::LogReg, t, {-2, 0, Penalty::L1, ClassWeight::Equal}, 1);
  int zeros = 0;
  for (Eigen::Index j = 1; j < m.w.size(); ++j) zeros += m.w[j] == 0.0;
  CHECK(m.w[0] > 0.0);
  CHECK(zeros >= 6);
}

TEST_CASE("scores of hand-set models") {
  TrainedModel lin;
  lin.kind = ClassifierKind::LinearSvm;
  lin.dim = 2;
  lin.w = Eigen::Vector2d(1, -1);
  lin.b = 0.5;
  const std::vector<double> x{2, 1};
  CHECK(score(lin, x) == 1.5);

  TrainedModel lr;
  lr.kind = ClassifierKind::LogReg;
  lr.dim = 2;
  lr.w = Eigen::Vector2d::Zero();
  CHECK(score(lr, x) == 0.0);

  TrainedModel acc;
  acc.kind = ClassifierKind::AlwaysAccept;
  CHECK(score(acc, x) == 1.0);
  TrainedModel rej;
  rej.kind = ClassifierKind::AlwaysReject;
  CHECK(score(rej, x) == -1.0);

  const std::vector<double> bad{1, 2, 3};
  try {
    score(lin, bad);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("random baseline is seeded and bounded") {
  const auto t = gaussian_blobs(20, 3, 1.0, 1);
  const auto a = train(ClassifierKind::Random, t, {}, 42);
  const auto b = train(ClassifierKind::Random, t, {}, 42);
  const auto c = train(ClassifierKind::Random, t, {}, 43);
  const Eigen::VectorXd sa = score_rows(a, t.x), sb = score_rows(b, t.x), sc = score_rows(c, t.x);
  CHECK(sa == sb);
  CHECK(sa != sc);
  for (Eigen::Index i = 0; i < sa.size(); ++i) {
    CHECK(sa[i] >= -1.0);
    CHECK(sa[i] <= 1.0);
  }
}

TEST_CASE("flipping labels negates the linear decision") {
  auto t = gaussian_blobs(60, 4, 1.0, 5);
  const auto m = train(ClassifierKind::LinearSvm, t, {0, 0}, 1);
  for (auto& y : t.y) y = -y;
  const auto f = train(ClassifierKind::LinearSvm, t, {0, 0}, 1);
  const Eigen::VectorXd s = score_rows(m, t.x), sf = score_rows(f, t.x);
  for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(std::abs(s[i] + sf[i]) < 1e-3);
}

TEST_CASE("training errors") {
  auto t = gaussian_blobs(10, 2, 1.0, 1);
  auto single = t;
  for (auto& y : single.y) y = 1;
  auto kind = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Stage;
  };
  CHECK(kind([&] { train(ClassifierKind::LinearSvm, single, {}, 1); }) == ErrorKind::SingleClass);
  CHECK(kind([&] { train(ClassifierKind::LogReg, single, {}, 1); }) == ErrorKind::SingleClass);
  auto nan = t;
  nan.x(3, 1) = std::nan("");
  CHECK(kind([&] { train(ClassifierKind::RbfSvm, nan, {}, 1); }) == ErrorKind::NonFinite);
  CHECK(kind([&] { train(ClassifierKind::AlwaysAccept, single, {}, 1); }) == ErrorKind::Stage);
}

TEST_CASE("grid points per classifier") {
  const auto g = GridSpec::with_stride(5);
  CHECK(g.c_exps.size() == 8);
  CHECK(g.c_exps.front() == -25);
  CHECK(g.c_exps.back() == 10);
  CHECK(GridSpec::with_stride(1).c_exps.size() == 36);
  CHECK(g.points(ClassifierKind::LinearSvm).size() == 16);
  CHECK(g.points(ClassifierKind::RbfSvm).size() == 128);
  CHECK(g.points(ClassifierKind::LogReg).size() == 32);
  CHECK(g.points(ClassifierKind::AlwaysAccept).size() == 1);
  const auto pts = g.points(ClassifierKind::RbfSvm);
  CHECK(std::is_sorted(pts.begin(), pts.end()));
}

namespace {

std::vector<CvFold> folds_from(const TrainingSet& all) {
  std::vector<CvFold> folds(3);
  const auto n = static_cast<Eigen::Index>(all.size());
  for (int f = 0; f < 3; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) (i % 3 == f ? te : tr).push_back(i);
    auto take = [&](const std::vector<Eigen::Index>& idx) {
      TrainingSet s;
      s.x.resize(static_cast<Eigen::Index>(idx.size()), all.x.cols());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        s.x.row(static_cast<Eigen::Index>(r)) = all.x.row(idx[r]);
        s.y.push_back(all.y[static_cast<std::size_t>(idx[r])]);
      }
      return s;
    };
    folds[static_cast<std::size_t>(f)] = {take(tr), take(te)};
  }
  return folds;
}

double direct_cv_eer(ClassifierKind kind, const std::vector<CvFold>& folds, const HyperParams& hp) {
  double sum = 0;
  for (const auto& f : folds) {
    const auto m = train(kind, f.train, hp, 1);
    const Eigen::VectorXd s = score_rows(m, f.test.x);
    PairScoreSet set;
    for (Eigen::Index i = 0; i < s.size(); ++i) set.push_back({s[i], f.test.y[static_cast<std::size_t>(i)] > 0});
    sum += eer_threshold(set).hter;
  }
  return sum / 3.0;
}

}  // namespace

TEST_CASE("singleton grid returns its point and the direct fold average") {
  const auto folds = folds_from(gaussian_blobs(90, 5, 0.8, 13));
  GridSpec g;
  g.c_exps = {0};
  g.gamma_exps = {-3};
  g.penalties = {Penalty::L2};
  g.weights = {ClassWeight::Equal};
  for (ClassifierKind kind : {ClassifierKind::LinearSvm, ClassifierKind::RbfSvm}) {
    const auto r = grid_search(kind, folds, g, 1);
    CHECK(r.points.size() == 1);
    CHECK(r.best == g.points(kind).front());
    CHECK(std::abs(r.mean_cv_eer - direct_cv_eer(kind, folds, r.best)) < 1e-9);
  }
}

TEST_CASE("coarse grid winner reproduces its cv score independently") {
  const auto folds = folds_from(gaussian_blobs(90, 5, 0.8, 17));
  const auto r = grid_search(ClassifierKind::LinearSvm, folds, GridSpec::with_stride(5), 1);
  CHECK(std::abs(r.mean_cv_eer - direct_cv_eer(ClassifierKind::LinearSvm, folds, r.best)) < 0.01);
  for (const auto& p : r.points)
    if (!p.failed) CHECK(p.mean_eer >= r.mean_cv_eer);
}

TEST_CASE("ties go to the smallest hyperparameters") {
  const auto folds = folds_from(gaussian_blobs(60, 3, 6.0, 2));
  GridSpec g;
  g.c_exps = {-3, 2};
  g.gamma_exps = {0};
  g.penalties = {Penalty::L2};
  g.weights = {ClassWeight::Equal, ClassWeight::Balanced};
  const auto r = grid_search(ClassifierKind::LinearSvm, folds, g, 1);
  for (const auto& p : r.points) REQUIRE(p.mean_eer == 0.0);
  CHECK(r.best == HyperParams{-3, 0, Penalty::L2, ClassWeight::Equal});
}

TEST_CASE("grid search fails only when every point fails") {
  auto folds = folds_from(gaussian_blobs(30, 2, 1.0, 3));
  for (auto& f : folds)
    for (auto& y : f.train.y) y = 1;
  GridSpec g;
  g.c_exps = {0};
  g.gamma_exps = {0};
  try {
    grid_search(ClassifierKind::LinearSvm, folds, g, 1);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AllGridPointsFailed);
  }
}
