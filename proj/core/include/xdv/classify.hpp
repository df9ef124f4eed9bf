#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace xdv {

enum class ClassifierKind { LinearSvm, RbfSvm, LogReg, AlwaysAccept, AlwaysReject, Random };

std::string_view classifier_tag(ClassifierKind kind);  // linsvm | rbfsvm | lr | accept | reject | random
ClassifierKind classifier_of(std::string_view tag);
bool is_baseline(ClassifierKind kind) noexcept;

enum class Penalty { L1, L2 };
enum class ClassWeight { Equal, Balanced };

std::string_view penalty_tag(Penalty p);        // l1 | l2
std::string_view class_weight_tag(ClassWeight w);  // equal | balanced
Penalty penalty_of(std::string_view tag);
ClassWeight class_weight_of(std::string_view tag);

// Exponents of two; ordering is lexicographic in declaration order.
struct HyperParams {
  int c_exp = 0;
  int gamma_exp = 0;
  Penalty penalty = Penalty::L2;
  ClassWeight class_weight = ClassWeight::Equal;

  double c() const noexcept;
  double gamma() const noexcept;

  auto operator<=>(const HyperParams&) const = default;
};

std::string to_string(const HyperParams& hp);

// Rows are samples; labels are +1 (genuine) or -1 (impostor).
struct TrainingSet {
  Eigen::MatrixXd x;
  std::vector<int> y;

  std::size_t size() const noexcept { return y.size(); }
  std::uint64_t fingerprint() const;
};

// Per-sample cost multipliers: 1 for Equal, n / (2 n_class) for Balanced.
std::vector<double> class_weights(std::span<const int> y, ClassWeight w);

struct SolverOptions {
  double svm_tolerance = 1e-4;       // maximal KKT violation
  long svm_max_iterations = 100000;  // working-set updates
  double lr_tolerance = 1e-6;        // relative gradient norm
  long lr_max_iterations = 500;      // Newton steps (L2) or coordinate sweeps (L1)
};

struct TrainedModel {
  ClassifierKind kind = ClassifierKind::AlwaysAccept;
  HyperParams hp;
  std::size_t dim = 0;
  Eigen::VectorXd w;           // linear SVM and logistic regression
  double b = 0.0;
  Eigen::MatrixXd support;     // RBF support vectors (rows)
  Eigen::VectorXd dual_coef;   // alpha_i y_i per support vector
  std::uint64_t random_seed = 0;
  std::uint64_t training_fingerprint = 0;
  bool converged = true;
  long iterations = 0;
};

// Fits a model. Throws SingleClass / NonFinite / InvalidArgument. Solver
// non-convergence is reported through TrainedModel::converged.
TrainedModel train(ClassifierKind kind, const TrainingSet& data, const HyperParams& hp, std::uint64_t seed,
                   const SolverOptions& options = {});

// Decision value; higher means more likely genuine. Throws DimensionMismatch.
double score(const TrainedModel& model, std::span<const double> v);
Eigen::VectorXd score_rows(const TrainedModel& model, const Eigen::MatrixXd& x);

std::string model_to_json(const TrainedModel& model);

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

// min 1/2 a'Qa - sum a, Q_ij = y_i y_j K_ij, 0 <= a_i <= c_i, y'a = 0.
struct DualSolution {
  Eigen::VectorXd alpha;
  double rho = 0.0;       // decision = sum_i alpha_i y_i K(x_i, x) - rho
  double kkt_gap = 0.0;   // max violation m(a) - M(a) at exit
  long iterations = 0;
  bool converged = false;
};

DualSolution solve_svm_dual(const Eigen::MatrixXd& kernel, std::span<const int> y, std::span<const double> c,
                            double tolerance = 1e-4, long max_iterations = 100000);

// sum_i s_i log(1 + exp(-y_i (w.x_i + b))) + (1/C) R(w), R = ||w||^2/2 (L2)
// or ||w||_1 (L1); the bias is not penalized.
struct LogRegProblem {
  const Eigen::MatrixXd* x = nullptr;
  std::vector<int> y;
  std::vector<double> sample_weight;
  double inv_c = 1.0;
  Penalty penalty = Penalty::L2;
};

double logreg_objective(const LogRegProblem& p, const Eigen::VectorXd& w, double b);
// Gradient with respect to (w, b); the bias derivative is the last entry.
// For L1 the penalty contributes sign(w_j) (zero at w_j = 0).
Eigen::VectorXd logreg_gradient(const LogRegProblem& p, const Eigen::VectorXd& w, double b);

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

struct GridSpec {
  std::vector<int> c_exps;
  std::vector<int> gamma_exps;
  std::vector<Penalty> penalties{Penalty::L1, Penalty::L2};
  std::vector<ClassWeight> weights{ClassWeight::Equal, ClassWeight::Balanced};

  // Exponents -25..10 with the given stride (5 = coarse, 1 = full).
  static GridSpec with_stride(int stride);

  // Points relevant to `kind`, in increasing HyperParams order.
  std::vector<HyperParams> points(ClassifierKind kind) const;
};

struct CvFold {
  TrainingSet train;
  TrainingSet test;
};

struct GridPointResult {
  HyperParams hp;
  double mean_eer = 0.0;
  bool failed = false;
  std::string error;
};

struct GridResult {
  HyperParams best;
  double mean_cv_eer = 0.0;
  std::vector<GridPointResult> points;
};

// Picks the point with minimal mean fold EER (ties: smallest HyperParams).
// Failed points are skipped; throws AllGridPointsFailed when none succeed.
GridResult grid_search(ClassifierKind kind, std::span<const CvFold> folds, const GridSpec& grid,
                       std::uint64_t seed, const SolverOptions& options = {});

}  // namespace xdv
