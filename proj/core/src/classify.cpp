#include <algorithm>
#include <array>
#include <cmath>

#include <nlohmann/json.hpp>

#include "classify_internal.hpp"
#include "xdv/error.hpp"
#include "xdv/rng.hpp"

namespace xdv {
namespace {

constexpr std::array<std::pair<ClassifierKind, std::string_view>, 6> kClassifierTags{{
    {ClassifierKind::LinearSvm, "linsvm"},
    {ClassifierKind::RbfSvm, "rbfsvm"},
    {ClassifierKind::LogReg, "lr"},
    {ClassifierKind::AlwaysAccept, "accept"},
    {ClassifierKind::AlwaysReject, "reject"},
    {ClassifierKind::Random, "random"},
}};

double random_score(std::uint64_t seed, std::span<const double> v) {
  Fingerprint f;
  f.add(seed);
  for (double x : v) f.add(x);
  return 2.0 * (static_cast<double>(mix64(f.value()) >> 11) * 0x1.0p-53) - 1.0;
}

}  // namespace

std::string_view classifier_tag(ClassifierKind kind) {
  for (const auto& [k, tag] : kClassifierTags)
    if (k == kind) return tag;
  return "?";
}

ClassifierKind classifier_of(std::string_view tag) {
  for (const auto& [k, t] : kClassifierTags)
    if (t == tag) return k;
  fail(ErrorKind::InvalidArgument,
       "unknown classifier '" + std::string(tag) + "' (valid: linsvm, rbfsvm, lr, accept, reject, random)");
}

bool is_baseline(ClassifierKind kind) noexcept {
  return kind == ClassifierKind::AlwaysAccept || kind == ClassifierKind::AlwaysReject ||
         kind == ClassifierKind::Random;
}

std::string_view penalty_tag(Penalty p) { return p == Penalty::L1 ? "l1" : "l2"; }
std::string_view class_weight_tag(ClassWeight w) { return w == ClassWeight::Equal ? "equal" : "balanced"; }

Penalty penalty_of(std::string_view tag) {
  if (tag == "l1") return Penalty::L1;
  if (tag == "l2") return Penalty::L2;
  fail(ErrorKind::InvalidArgument, "unknown penalty '" + std::string(tag) + "' (valid: l1, l2)");
}

ClassWeight class_weight_of(std::string_view tag) {
  if (tag == "equal") return ClassWeight::Equal;
  if (tag == "balanced") return ClassWeight::Balanced;
  fail(ErrorKind::InvalidArgument, "unknown class weight '" + std::string(tag) + "' (valid: equal, balanced)");
}

double HyperParams::c() const noexcept { return std::ldexp(1.0, c_exp); }
double HyperParams::gamma() const noexcept { return std::ldexp(1.0, gamma_exp); }

std::string to_string(const HyperParams& hp) {
  return "C=2^" + std::to_string(hp.c_exp) + " gamma=2^" + std::to_string(hp.gamma_exp) + " penalty=" +
         std::string(penalty_tag(hp.penalty)) + " weight=" + std::string(class_weight_tag(hp.class_weight));
}

std::uint64_t TrainingSet::fingerprint() const {
  Fingerprint f;
  f.add(static_cast<std::uint64_t>(x.rows())).add(static_cast<std::uint64_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    f.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(y[static_cast<std::size_t>(i)])));
    for (Eigen::Index j = 0; j < x.cols(); ++j) f.add(x(i, j));
  }
  return f.value();
}

std::vector<double> class_weights(std::span<const int> y, ClassWeight w) {
  std::vector<double> out(y.size(), 1.0);
  if (w == ClassWeight::Equal) return out;
  const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const auto n = static_cast<double>(y.size());
  const double neg = n - pos;
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] == 1 ? n / (2.0 * pos) : n / (2.0 * neg);
  return out;
}

namespace detail {

void check_training_set(const TrainingSet& data) {
  if (static_cast<std::size_t>(data.x.rows()) != data.y.size())
    fail(ErrorKind::DimensionMismatch, "training set: feature rows and labels disagree in count");
  if (data.x.cols() == 0) fail(ErrorKind::InvalidArgument, "training set: zero-dimensional features");
  bool pos = false, neg = false;
  for (int label : data.y) {
    if (label == 1) pos = true;
    else if (label == -1) neg = true;
    else fail(ErrorKind::InvalidArgument, "training set: labels must be +1 or -1");
  }
  if (!pos || !neg) fail(ErrorKind::SingleClass, "training set contains a single class");
  if (!data.x.allFinite()) fail(ErrorKind::NonFinite, "training set contains non-finite features");
}

}  // namespace detail

TrainedModel train(ClassifierKind kind, const TrainingSet& data, const HyperParams& hp, std::uint64_t seed,
                   const SolverOptions& options) {
  TrainedModel m;
  m.kind = kind;
  m.hp = hp;
  m.dim = static_cast<std::size_t>(data.x.cols());
  if (is_baseline(kind)) {
    m.random_seed = seed;
    m.training_fingerprint = data.fingerprint();
    return m;
  }
  detail::check_training_set(data);
  switch (kind) {
    case ClassifierKind::LinearSvm: {
      const Eigen::MatrixXd gram = data.x * data.x.transpose();
      const DualSolution sol = detail::svm_dual_for(data, gram, hp, options);
      Eigen::VectorXd coef(sol.alpha.size());
      for (Eigen::Index i = 0; i < coef.size(); ++i) coef[i] = sol.alpha[i] * data.y[static_cast<std::size_t>(i)];
      m.w = data.x.transpose() * coef;
      m.b = -sol.rho;
      m.converged = sol.converged;
      m.iterations = sol.iterations;
      break;
    }
    case ClassifierKind::RbfSvm: {
      const Eigen::MatrixXd kernel = (-hp.gamma() * detail::squared_distances(data.x, data.x)).array().exp();
      const DualSolution sol = detail::svm_dual_for(data, kernel, hp, options);
      std::vector<Eigen::Index> sv;
      for (Eigen::Index i = 0; i < sol.alpha.size(); ++i)
        if (sol.alpha[i] > 0.0) sv.push_back(i);
      m.support.resize(static_cast<Eigen::Index>(sv.size()), data.x.cols());
      m.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
      for (std::size_t k = 0; k < sv.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        m.support.row(r) = data.x.row(sv[k]);
        m.dual_coef[r] = sol.alpha[sv[k]] * data.y[static_cast<std::size_t>(sv[k])];
      }
      m.b = -sol.rho;
      m.converged = sol.converged;
      m.iterations = sol.iterations;
      break;
    }
    case ClassifierKind::LogReg: m = detail::fit_logreg(data, hp, seed, options); break;
    default: break;
  }
  m.training_fingerprint = data.fingerprint();
  return m;
}

double score(const TrainedModel& model, std::span<const double> v) {
  if (model.kind == ClassifierKind::AlwaysAccept) return 1.0;
  if (model.kind == ClassifierKind::AlwaysReject) return -1.0;
  if (v.size() != model.dim)
    fail(ErrorKind::DimensionMismatch, "score: vector has dimension " + std::to_string(v.size()) +
                                           ", model expects " + std::to_string(model.dim));
  const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
  switch (model.kind) {
    case ClassifierKind::AlwaysAccept: return 1.0;
    case ClassifierKind::AlwaysReject: return -1.0;
    case ClassifierKind::Random: return random_score(model.random_seed, v);
    case ClassifierKind::LinearSvm:
    case ClassifierKind::LogReg: return model.w.dot(x) + model.b;
    case ClassifierKind::RbfSvm: {
      double s = model.b;
      for (Eigen::Index i = 0; i < model.support.rows(); ++i)
        s += model.dual_coef[i] * std::exp(-model.hp.gamma() * (model.support.row(i).transpose() - x).squaredNorm());
      return s;
    }
  }
  return 0.0;
}

Eigen::VectorXd score_rows(const TrainedModel& model, const Eigen::MatrixXd& x) {
  if (model.kind == ClassifierKind::AlwaysAccept) return Eigen::VectorXd::Constant(x.rows(), 1.0);
  if (model.kind == ClassifierKind::AlwaysReject) return Eigen::VectorXd::Constant(x.rows(), -1.0);
  if (static_cast<std::size_t>(x.cols()) != model.dim)
    fail(ErrorKind::DimensionMismatch, "score: rows have dimension " + std::to_string(x.cols()) +
                                           ", model expects " + std::to_string(model.dim));
  switch (model.kind) {
    case ClassifierKind::LinearSvm:
    case ClassifierKind::LogReg: return (x * model.w).array() + model.b;
    case ClassifierKind::RbfSvm: {
      const Eigen::MatrixXd k = (-model.hp.gamma() * detail::squared_distances(x, model.support)).array().exp();
      return (k * model.dual_coef).array() + model.b;
    }
    default: {
      Eigen::VectorXd out(x.rows());
      std::vector<double> row(static_cast<std::size_t>(x.cols()));
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
        out[i] = score(model, row);
      }
      return out;
    }
  }
}

std::string model_to_json(const TrainedModel& model) {
  nlohmann::ordered_json j;
  j["kind"] = classifier_tag(model.kind);
  j["c_exp"] = model.hp.c_exp;
  j["gamma_exp"] = model.hp.gamma_exp;
  j["penalty"] = penalty_tag(model.hp.penalty);
  j["class_weight"] = class_weight_tag(model.hp.class_weight);
  j["dim"] = model.dim;
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  j["training_fingerprint"] = model.training_fingerprint;
  j["bias"] = model.b;
  if (model.w.size() > 0) j["weights"] = std::vector<double>(model.w.data(), model.w.data() + model.w.size());
  if (model.dual_coef.size() > 0) {
    j["dual_coef"] = std::vector<double>(model.dual_coef.data(), model.dual_coef.data() + model.dual_coef.size());
    j["n_support"] = model.support.rows();
  }
  if (model.kind == ClassifierKind::Random) j["random_seed"] = model.random_seed;
  return j.dump();
}

}  // namespace xdv
