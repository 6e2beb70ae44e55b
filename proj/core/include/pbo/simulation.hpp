#pragma once

// Synthetic utilities, simulated decision-makers and noise calibration.
// Every problem is posed as maximization; minimization benchmarks are
// negated.

#include "pbo/core.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pbo {

struct KnownOptimum {
  Point point;
  double value = 0.0;
};

struct TestProblem {
  std::string name;
  Domain domain;
  std::function<double(const Point&)> utility;
  std::optional<KnownOptimum> optimum;
};

/// Built-in problems: "ackley6", "alpine1-7", "hartmann6".
std::vector<std::string> builtin_problem_names();
/// Looks up a built-in problem. Throws InvalidArgument on an unknown name.
TestProblem make_problem(const std::string& name);

/// Custom problem from {"kind": "ackley" | "alpine1" | "hartmann6" | "quadratic",
/// "lower": [...], "upper": [...]}. hartmann6 ignores the bounds. quadratic
/// accepts "center" (default: box midpoint) and "scale" (default 1) and
/// evaluates −scale · Σ ((xᵢ − cᵢ)/wᵢ)² with w the box width. Optional "name".
TestProblem problem_from_json(const json& j);

/// Utility at x. Throws InvalidArgument when x is outside the domain.
double eval_problem(const TestProblem& problem, const Point& x);

/// Standard formulas, maximization sign.
double ackley_utility(const Point& x);
double alpine1_utility(const Point& x);
double hartmann6_utility(const Point& x);

struct SimulatedDM {
  std::function<double(const Point&)> utility;
  double noise_level = 0.0;
  Rng rng;

  SimulatedDM(std::function<double(const Point&)> u, double noise, std::uint64_t seed);
};

/// argmaxᵢ utility(xᵢ) + λ·Gumbelᵢ, which samples the softmax choice
/// distribution; λ = 0 is the exact argmax with lowest-index ties.
Response simulate_response(SimulatedDM& dm, const Query& X);

/// Utility pairs drawn from the top fraction of a uniform random sample.
struct CalibrationPairs {
  std::vector<double> gaps;  // |u(x) − u(y)| per pair
};

CalibrationPairs calibration_pairs(const TestProblem& problem, Rng& rng, int grid = 100000,
                                   double top_fraction = 0.01, int pairs = 20000);

/// Mean probability of choosing the strictly worse item of each pair under
/// softmax noise λ: mean of 1 / (1 + exp(gap/λ)), zero-gap pairs count 0.
double expected_mistake_rate(const CalibrationPairs& pairs, double noise_level);

/// Bisection in log λ until the expected mistake rate on one draw of
/// calibration pairs is within 1e-4 · target of the target. Throws InvalidArgument when the
/// target is outside (0, ½) or unreachable.
double calibrate_noise(const TestProblem& problem, double target_error_rate, Rng& rng);

/// 4·d uniformly random queries, answered by the DM.
PreferenceDataset initial_design(const TestProblem& problem, int q, SimulatedDM& dm, Rng& rng);

}  // namespace pbo
