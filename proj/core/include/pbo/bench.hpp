#pragma once

// Replicated simulated-DM runs, simple-regret traces and their aggregation.

#include "pbo/acquisition.hpp"
#include "pbo/core.hpp"
#include "pbo/preference_model.hpp"
#include "pbo/simulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pbo {

struct RecommendOptions {
  int raw_candidates = 256;
  int restarts = 4;
  int max_iterations = 100;
  double learning_rate = 0.02;
};

/// Maximizes the posterior mean: scores raw uniform candidates and the
/// dataset's points, then runs projected ascent from the best `restarts`.
/// Finite domains are enumerated. The result's mean is never below the best
/// scored candidate's.
Point recommend(const PosteriorModel& model, const Domain& domain, Rng& rng, const RecommendOptions& options = {});

/// Initial data of `comparisons` queries pairing a fixed anchor with
/// uniformly random points; replaces the random initial design.
struct SeededAnchor {
  Point anchor;
  int comparisons = 20;
};

struct BenchConfig {
  std::string problem = "hartmann6";
  /// Custom problem (see problem_from_json); overrides `problem` when set.
  std::optional<json> problem_spec;
  AcquisitionSpec acquisition;
  int n_queries = 150;
  int n_replications = 1;
  /// Target comparison-mistake rate used to calibrate the DM's λ.
  double noise_target = 0.2;
  /// Explicit DM λ; skips calibration when set.
  std::optional<double> noise_level;
  std::uint64_t seed = 0;
  int refit_every = 5;
  int hyper_restarts = 1;
  int hyper_max_evaluations = 100;
  RecommendOptions recommend;
  std::optional<SeededAnchor> seeded_anchor;

  void validate() const;
};

struct RegretTrace {
  std::uint64_t seed = 0;
  /// Index n holds the value after n acquisition-selected queries, n = 0..N.
  std::vector<double> regret;
  /// Seconds spent selecting query n (0 at index 0).
  std::vector<double> acq_seconds;
  std::vector<Point> recommended;
  bool failed = false;
  std::string failure;
};

TestProblem resolve_problem(const BenchConfig& cfg);
/// cfg.noise_level if set, else calibrated from cfg.seed.
double resolve_noise_level(const BenchConfig& cfg, const TestProblem& problem);

/// One replication with replication seed `seed` and DM noise λ. Errors are
/// caught and recorded in the trace, which then stops early.
RegretTrace run_replication(const BenchConfig& cfg, const TestProblem& problem, double noise_level,
                            std::uint64_t seed);
RegretTrace run_replication(const BenchConfig& cfg, std::uint64_t seed);

/// Replication r uses seed cfg.seed + r.
std::vector<RegretTrace> run_benchmark(const BenchConfig& cfg);

struct SummaryRow {
  int query_index = 0;
  double mean_log10_regret = 0.0;
  double half_width = 0.0;
};

struct Summary {
  std::vector<SummaryRow> rows;
  double mean_acq_seconds = 0.0;
  int replications = 0;
};

/// Mean log10 regret (clamped below at 1e-12) and 1.96·sd/√R per index.
/// Throws InvalidArgument on no traces or unequal lengths.
Summary aggregate(const std::vector<RegretTrace>& traces);

inline constexpr const char* kCsvHeader = "problem,algo,q,noise,seed,query_index,regret,log10_regret,acq_seconds";

/// One row per (replication, query index), sorted by (seed, query_index).
void write_csv(std::ostream& out, const BenchConfig& cfg, const std::vector<RegretTrace>& traces);

struct CsvRow {
  std::string problem, algo;
  int q = 0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  int query_index = 0;
  double regret = 0.0, log10_regret = 0.0, acq_seconds = 0.0;
};

/// Parses a file written by write_csv. Throws InvalidArgument on a header
/// mismatch or malformed row.
std::vector<CsvRow> read_csv(std::istream& in);

/// Regret-curve figure (mean log10 regret ± half-width per algorithm/q
/// series) as a standalone SVG document.
std::string regret_plot_svg(const std::vector<CsvRow>& rows);

}  // namespace pbo
