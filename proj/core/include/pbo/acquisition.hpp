#pragma once

// Acquisition functions over a fitted PosteriorModel and the maximizer
// that turns them into the next query.

#include "pbo/core.hpp"
#include "pbo/preference_model.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace pbo {

enum class AcquisitionKind { Qeubo, Qei, Thompson, Random };

std::string to_string(AcquisitionKind kind);
/// Accepts "qeubo", "qei", "qts" (or "thompson") and "random".
AcquisitionKind acquisition_kind_from_string(std::string_view name);

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::Qeubo;
  int q = 2;
  int mc_samples = 128;
  int restarts = 16;
  int raw_candidates = 512;
  /// Projected ascent budget per restart, in unit-cube coordinates.
  int max_iterations = 100;
  double learning_rate = 0.02;
  /// Thompson sampling: random Fourier features per path and candidate count.
  int rff_features = 1000;
  int ts_candidates = 1024;

  /// Throws InvalidArgument when q < 2, mc_samples < 1 or restarts < 1.
  void validate() const;
};

json acquisition_spec_to_json(const AcquisitionSpec& spec);
/// Missing fields keep their defaults. "algo" is accepted as an alias of "kind".
AcquisitionSpec acquisition_spec_from_json(const json& j);

/// mc_samples × q standard normal draws, held fixed for one maximization.
struct BaseSampleSet {
  Eigen::MatrixXd z;

  static BaseSampleSet draw(int samples, int q, Rng& rng);
  int samples() const noexcept { return static_cast<int>(z.rows()); }
  int q() const noexcept { return static_cast<int>(z.cols()); }
};

/// SAA estimate of E[max f(X)]: mean over samples of maxᵢ (μ + L εₛ)ᵢ.
double qeubo_value(const PosteriorModel& model, const Query& X, const BaseSampleSet& base);

/// SAA estimate of E[{max f(X) − incumbent}⁺].
double qei_value(const PosteriorModel& model, const Query& X, double incumbent, const BaseSampleSet& base);

/// Shared SAA evaluator. With `incumbent` null this is qEUBO, otherwise qEI.
/// When `grad` is non-null it receives d/dxᵢ of the value for every point:
/// analytic through the Cholesky factor when the posterior covariance has
/// full rank, central differences otherwise.
double saa_value(const PosteriorModel& model, const Query& X, const BaseSampleSet& base, const double* incumbent,
                 std::vector<Eigen::VectorXd>* grad = nullptr);

/// Closed-form E[max(f₀, f₁)] for a bivariate Gaussian.
double eubo_closed_form_q2(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov);

/// Maximum posterior mean over the dataset's distinct points.
double incumbent_value(const PosteriorModel& model, const PreferenceDataset& ds);

/// Quasi-random (shifted Halton) points in the domain plus the dataset's
/// distinct points; for finite domains, every alternative.
std::vector<Point> thompson_candidates(const Domain& domain, const PreferenceDataset& ds, int count, Rng& rng);

/// Batch Thompson sampling: q independent approximate posterior paths, each
/// an RFF prior path conditioned on a joint Laplace-posterior draw at the
/// anchors; returns each path's argmax over the candidates.
Query thompson_query(const PosteriorModel& model, int q, const std::vector<Point>& candidates, Rng& rng,
                     int features = 1000);

/// q i.i.d. uniform points from the domain.
Query random_query(const Domain& domain, int q, Rng& rng);

/// SAA maximization of qEUBO or qEI. Box domains: raw random candidates plus
/// the replicated posterior-mean maximizer, then projected ascent from the
/// best `restarts` of them. Finite domains: exhaustive enumeration when
/// |X|^q ≤ 1e5, scored random candidates otherwise.
Query optimize_acquisition(const PosteriorModel& model, const AcquisitionSpec& spec, const Domain& domain,
                           const PreferenceDataset& ds, Rng& rng);

/// Dispatches on spec.kind.
Query next_query(const PosteriorModel& model, const AcquisitionSpec& spec, const Domain& domain,
                 const PreferenceDataset& ds, Rng& rng);

}  // namespace pbo
