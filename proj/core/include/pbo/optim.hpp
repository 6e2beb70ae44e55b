#pragma once

// Box-constrained local maximizers used by hyperparameter fitting,
// acquisition optimization and recommendation.

#include <Eigen/Core>

#include <functional>

namespace pbo::optim {

struct Result {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
};

struct NelderMeadOptions {
  int max_evaluations = 200;
  /// Initial simplex edge as a fraction of the box width.
  double initial_step = 0.15;
  /// Stop when the simplex value spread falls below this.
  double value_tolerance = 1e-8;
};

/// Derivative-free maximization; trial points are clamped into [lower, upper].
/// Non-finite objective values count as -inf. Returns the best point seen.
Result nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                            const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, const NelderMeadOptions& options = {});

struct AscentOptions {
  int max_iterations = 100;
  double learning_rate = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Stop once the projected step is shorter than this (∞-norm).
  double step_tolerance = 1e-7;
};

/// Returns the objective and writes the gradient into *grad when non-null.
using ValueAndGradient = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// Projected Adam ascent; the result is the best iterate visited, so its
/// value is never below the value at x0.
Result projected_ascent(const ValueAndGradient& objective, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const AscentOptions& options = {});

}  // namespace pbo::optim
