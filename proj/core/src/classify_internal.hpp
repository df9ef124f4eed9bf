#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "xdv/classify.hpp"

namespace xdv::detail {

// ||a_i - b_j||^2, clamped at zero.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Throws unless labels are +-1 with both classes present and x is finite.
void check_training_set(const TrainingSet& data);

DualSolution svm_dual_for(const TrainingSet& data, const Eigen::MatrixXd& kernel, const HyperParams& hp,
                          const SolverOptions& options);

TrainedModel fit_logreg(const TrainingSet& data, const HyperParams& hp, std::uint64_t seed,
                        const SolverOptions& options);

}  // namespace xdv::detail
