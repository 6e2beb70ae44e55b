#pragma once

// Gaussian-process surrogate over the latent utility, trained from choice
// data through the softmax likelihood with a Laplace approximation.
//
// The latent vector f at the m distinct dataset points ("anchors") is
// parameterized as f = c + K a. At the mode, a equals the likelihood
// gradient, and with W = Lw Lwᵀ the negative log-likelihood Hessian and
// B = I + Lwᵀ K Lw, the predictive posterior at new points X is
//
//   mean(X) = c + K(X, A) a
//   cov(X)  = K(X, X) − K(X, A) Q K(A, X),   Q = Lw B⁻¹ Lwᵀ.
//
// Neither expression needs K⁻¹, so singular W (the softmax Hessian always
// is) causes no trouble.

#include "pbo/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace pbo {

struct Hyperparameters {
  Eigen::VectorXd lengthscales;
  double outputscale = 1.0;
  double mean_const = 0.0;
  double noise_level = 0.1;

  /// Lengthscales 0.2 · width, unit outputscale, zero mean, λ = 0.1.
  static Hyperparameters defaults(const Domain& domain);
};

json hyperparameters_to_json(const Hyperparameters& h);
Hyperparameters hyperparameters_from_json(const json& j);

/// outputscale · exp(−½ Σᵢ ((xᵢ − yᵢ)/ℓᵢ)²). Throws InvalidArgument on a
/// dimension mismatch.
double rbf_kernel(const Point& x, const Point& y, const Hyperparameters& hyper);

/// Softmax choice probabilities of utilities/λ, computed with max
/// subtraction. λ = 0 gives the noise-free limit: uniform over the argmax set.
Eigen::VectorXd choice_likelihood(const Eigen::VectorXd& utilities, double noise_level);

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct LaplaceOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 100;
  int max_halvings = 30;
};

class PosteriorModel {
 public:
  const Hyperparameters& hyper() const noexcept { return hyper_; }
  const PreferenceDataset& dataset() const noexcept { return dataset_; }
  int dim() const noexcept { return static_cast<int>(hyper_.lengthscales.size()); }
  Eigen::Index num_anchors() const noexcept { return anchors_.rows(); }
  /// m × d, one anchor per row, in dataset distinct-point order.
  const Eigen::MatrixXd& anchors() const noexcept { return anchors_; }
  /// Laplace mode of the latent utility at the anchors.
  const Eigen::VectorXd& mode() const noexcept { return mode_; }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  /// Q = Lw B⁻¹ Lwᵀ (m × m).
  const Eigen::MatrixXd& reduction() const noexcept { return reduction_; }
  const Eigen::LLT<Eigen::MatrixXd>& kernel_cholesky() const noexcept { return kernel_llt_; }
  double jitter() const noexcept { return jitter_; }
  double log_marginal_likelihood() const noexcept { return log_marginal_; }
  int newton_iterations() const noexcept { return newton_iterations_; }

  /// Joint predictive posterior over f(points). Throws on dimension mismatch.
  GaussianPosterior posterior_at(const std::vector<Point>& points) const;
  double mean_at(const Point& x) const;
  /// Predictive mean, with its gradient w.r.t. x written to *grad if non-null.
  double mean_and_gradient(const Point& x, Eigen::VectorXd* grad) const;

  /// k(x, anchor_j) for all anchors.
  Eigen::VectorXd cross_kernel(const Point& x) const;
  /// ∂k(x, anchor_j)/∂x as an m × d matrix, given kx = cross_kernel(x).
  Eigen::MatrixXd cross_kernel_jacobian(const Point& x, const Eigen::VectorXd& kx) const;
  /// Laplace posterior covariance at the anchors, K − K Q K.
  Eigen::MatrixXd anchor_covariance() const;

 private:
  friend PosteriorModel fit_laplace(const PreferenceDataset&, const Hyperparameters&, const LaplaceOptions&,
                                    const Eigen::VectorXd*);

  void check_dim(const Point& x) const;

  Hyperparameters hyper_;
  PreferenceDataset dataset_;
  Eigen::MatrixXd anchors_;
  Eigen::VectorXd inv_sq_lengthscales_;
  Eigen::MatrixXd kernel_;
  Eigen::LLT<Eigen::MatrixXd> kernel_llt_;
  double jitter_ = 0.0;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd mode_;
  Eigen::MatrixXd reduction_;
  double log_marginal_ = 0.0;
  int newton_iterations_ = 0;
};

/// Finds the Laplace mode by damped Newton iterations. An empty dataset
/// yields the prior. `warm_alpha`, when given and of matching size, seeds
/// the iteration. Throws NumericalError on non-convergence or when the
/// kernel matrix stays indefinite after jitter escalation.
PosteriorModel fit_laplace(const PreferenceDataset& ds, const Hyperparameters& hyper,
                           const LaplaceOptions& options = {}, const Eigen::VectorXd* warm_alpha = nullptr);

GaussianPosterior posterior_at(const PosteriorModel& model, const std::vector<Point>& points);

/// Search box for fit_hyperparameters, in natural (not log) units.
struct HyperparameterBounds {
  Eigen::VectorXd lengthscale_lower, lengthscale_upper;
  double outputscale_lower = 0.01, outputscale_upper = 100.0;
  double noise_lower = 1e-3, noise_upper = 10.0;

  /// Lengthscales in [0.01, 10] · width, outputscale in [0.01, 100],
  /// λ in [1e-3, 10].
  static HyperparameterBounds defaults(const Domain& domain);
};

struct HyperFitConfig {
  HyperparameterBounds bounds;
  int restarts = 3;
  int max_evaluations = 150;
  std::uint64_t seed = 0;
  /// Starting point of restart 0; Hyperparameters::defaults when absent.
  std::optional<Hyperparameters> init;
  /// Standard deviation of the log-normal prior on the outputscale, which
  /// pins the otherwise flat (outputscale, λ) scale direction; ≤ 0 disables.
  double log_outputscale_prior_sd = 1.0;
  /// Gamma(shape, rate) prior on ℓᵢ / lengthscale_unitᵢ. Disabled when
  /// lengthscale_unit is empty or shape ≤ 0. defaults() sets the unit to the
  /// domain widths.
  Eigen::VectorXd lengthscale_unit;
  double lengthscale_prior_shape = 3.0;
  double lengthscale_prior_rate = 6.0;

  static HyperFitConfig defaults(const Domain& domain);
};

/// Objective maximized by fit_hyperparameters: the Laplace log marginal
/// likelihood plus the outputscale and lengthscale log priors. -inf when the fit fails.
double hyperparameter_objective(const PreferenceDataset& ds, const Hyperparameters& hyper,
                                const HyperFitConfig& config);

/// Multi-restart Nelder–Mead over log lengthscales, log outputscale and
/// log λ within the configured bounds. mean_const is carried over from the
/// initialization: the choice likelihood is shift invariant, so the
/// marginal likelihood does not depend on it. Throws InvalidArgument on an
/// empty dataset and NumericalError when every restart fails.
Hyperparameters fit_hyperparameters(const PreferenceDataset& ds, const HyperFitConfig& config);

}  // namespace pbo
