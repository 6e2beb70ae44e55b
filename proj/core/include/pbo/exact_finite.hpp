#pragma once

// Exact Bayesian preference learning over a finite set of alternatives and
// a finite set of candidate utility functions. Everything here is a
// weighted sum over hypotheses, so the acquisition values and one-step
// values are exact rather than Monte Carlo estimates.

#include "pbo/core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace pbo::exact {

/// Absolute tolerance used for every argmax set in this module.
inline constexpr double kTieTolerance = 1e-9;

struct Likelihood {
  enum class Kind { Softmax, ConstantCorrect };
  Kind kind = Kind::Softmax;
  /// λ for Softmax (0 is the noise-free limit), a for ConstantCorrect.
  double param = 0.0;

  static Likelihood softmax(double noise_level);
  /// The utility maximizers within the query share probability a and the
  /// remaining items share 1 − a (uniform when every item is a maximizer).
  static Likelihood constant_correct(double a);
};

/// Response distribution of a single hypothesis on a query.
Eigen::VectorXd response_probabilities(const Likelihood& lik, const Eigen::VectorXd& query_utilities);

/// Query as indices into the alternatives.
using IndexQuery = std::vector<int>;

struct FiniteHypothesisState {
  /// H × n: row h holds hypothesis h's utility at each alternative.
  Eigen::MatrixXd utilities;
  Eigen::VectorXd weights;
  Likelihood likelihood;

  int num_alternatives() const noexcept { return static_cast<int>(utilities.cols()); }
  int num_hypotheses() const noexcept { return static_cast<int>(utilities.rows()); }

  /// Checks shapes, non-negative weights summing to 1 within 1e-12, and the
  /// likelihood parameter range. Throws InvalidArgument.
  void validate() const;
};

FiniteHypothesisState make_state(Eigen::MatrixXd utilities, Eigen::VectorXd weights, Likelihood likelihood);

/// Predictive probability of response r, Σₕ wₕ P(r | h, X).
double response_probability(const FiniteHypothesisState& state, const IndexQuery& X, int r);

/// Bayes update wₕ ∝ wₕ P(r | h, X). Throws NumericalError when the
/// observation has zero probability under every hypothesis.
FiniteHypothesisState exact_update(const FiniteHypothesisState& state, const IndexQuery& X, int r);

double exact_qeubo(const FiniteHypothesisState& state, const IndexQuery& X);
double exact_qei(const FiniteHypothesisState& state, const IndexQuery& X, double incumbent);
double exact_posterior_mean(const FiniteHypothesisState& state, int x);
Eigen::VectorXd exact_posterior_means(const FiniteHypothesisState& state);
/// Expected posterior-mean maximum after one more query X, enumerating all
/// responses of positive probability.
double exact_v(const FiniteHypothesisState& state, const IndexQuery& X);
/// Expected true utility of the chosen item, Σₕ wₕ Σᵣ P(r | h, X) fₕ(x_r).
double expected_chosen_utility(const FiniteHypothesisState& state, const IndexQuery& X);

/// Principal branch of the Lambert W function, by Halley iteration.
/// Throws InvalidArgument for z < −1/e.
double lambert_w(double z);

/// All ordered q-tuples over n alternatives, in lexicographic order.
std::vector<IndexQuery> enumerate_queries(int n, int q);

/// Indices whose value is within kTieTolerance of the maximum.
std::vector<int> argmax_set(const std::vector<double>& values);
/// Lowest index attaining the maximum up to kTieTolerance.
int first_argmax(const std::vector<double>& values);
int first_argmax(const Eigen::VectorXd& values);

struct TheoremReport {
  std::string theorem;
  std::string instance;
  bool pass = false;
  json witness;
};

json report_to_json(const TheoremReport& report);
json state_to_json(const FiniteHypothesisState& state);

/// Noise-free state: argmax over all ordered q-queries of exact_qeubo must be
/// contained in the argmax of exact_v.
TheoremReport verify_theorem1(const FiniteHypothesisState& state, int q);

/// `state` carries the softmax λ > 0 likelihood. With X* the first qEUBO
/// maximizer, checks V^λ(X*) ≥ maxₓ V⁰(X) − λ·W((q−1)/e) − 1e-9.
TheoremReport verify_theorem2(const FiniteHypothesisState& state, int q);

/// Σ softmax(s/λ)ᵢ sᵢ ≥ max s − λ·W((q−1)/e) with slack ≥ −1e-9.
TheoremReport verify_lemma_a1(const Eigen::VectorXd& s, double noise_level);

/// Softmax state: expected chosen utility at X ≥ qEUBO(X) − λ·W((q−1)/e),
/// checked on every ordered q-query.
TheoremReport verify_lemma_a2(const FiniteHypothesisState& state, int q);

/// Random instance: 3–5 alternatives, 2–5 hypotheses with i.i.d. U(−1, 1)
/// utilities (redrawn while any hypothesis repeats a value or two hypotheses
/// are within 1e-3 of each other), random weights.
FiniteHypothesisState random_instance(Rng& rng, const Likelihood& likelihood);

// ---------------------------------------------------------------------------
// Four-alternative counterexample on which qEI stalls.

enum class Policy { Qeubo, Qei };

/// Alternatives 0..3 (labels 1..4). Every hypothesis has f(0) = −1, f(1) = 0;
/// on (2, 3) the four hypotheses take (1, ½), (½, 1), (−½, −1), (−1, −½), with
/// prior weights (p/2, p/2, (1−p)/2, (1−p)/2) and the constant-correct
/// likelihood with parameter a. Returned before the initial observation.
FiniteHypothesisState theorem4_prior(double p, double a);

/// The initial observation: query (0, 1), response 1 (alternative 1 is
/// preferred by every hypothesis, so the posterior equals the prior).
inline const IndexQuery kTheorem4InitialQuery = {0, 1};
inline constexpr int kTheorem4InitialResponse = 1;

struct Theorem4Trace {
  Policy policy = Policy::Qei;
  /// Bayesian simple regret after n queries, n = 0..n_steps.
  std::vector<double> regret;
  /// qEI: the query chosen at step n if every reachable state chose the same
  /// one, else empty. qEUBO: the queries of the first simulated run.
  std::vector<IndexQuery> queries;
  /// Recommendation after n queries under the same convention (−1 if it
  /// differs across reachable states).
  std::vector<int> recommendations;
  /// qEI: number of distinct reachable states at the final step.
  /// qEUBO: number of simulated runs.
  int paths = 0;
};

/// qEI is propagated exactly over the distribution of reachable posterior
/// states. qEUBO is averaged over `runs` simulated response sequences with
/// the true hypothesis drawn from the prior; each run contributes its exact
/// posterior expected regret.
Theorem4Trace run_theorem4_instance(double p, double a, int n_steps, Policy policy, int runs = 500,
                                    std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Suites used by `pbo verify` and the acceptance checks.

struct SuiteResult {
  std::string suite;
  int checks = 0;
  int failures = 0;
  double seconds = 0.0;
  std::vector<TheoremReport> reports;
};

json suite_to_json(const SuiteResult& result);

/// theorem1: `trials` noise-free instances, q alternating 2 and 3.
SuiteResult run_theorem1_suite(std::uint64_t seed, int trials);
/// theorem2: `trials` softmax instances, λ cycling through {0.05, 0.2, 1.0},
/// q alternating 2 and 3.
SuiteResult run_theorem2_suite(std::uint64_t seed, int trials);
/// theorem4: the qEI and qEUBO traces at p = 0.2, a = 0.75 over 100 steps.
SuiteResult run_theorem4_suite(std::uint64_t seed, int runs = 500, int steps = 100);
/// lemmas: 100·trials Lemma A.1 draws and 2·trials Lemma A.2 states.
SuiteResult run_lemma_suite(std::uint64_t seed, int trials);

}  // namespace pbo::exact
