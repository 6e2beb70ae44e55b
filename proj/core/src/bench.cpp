#include "pbo/bench.hpp"

#include "pbo/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace pbo {

Point recommend(const PosteriorModel& model, const Domain& domain, Rng& rng, const RecommendOptions& options) {
  if (!domain.is_box()) {
    const auto& alts = domain.alternatives();
    std::size_t best = 0;
    double best_v = model.mean_at(alts[0]);
    for (std::size_t i = 1; i < alts.size(); ++i) {
      const double v = model.mean_at(alts[i]);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    return alts[best];
  }

  std::vector<Point> cands;
  for (int k = 0; k < options.raw_candidates; ++k) cands.push_back(domain.sample(rng));
  for (const auto& x : model.dataset().distinct_points())
    if (domain.contains(x)) cands.push_back(x);
  if (cands.empty()) cands.push_back(domain.sample(rng));
  std::vector<double> vals(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) vals[i] = model.mean_at(cands[i]);
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });

  Point best = cands[order.front()];
  double best_v = vals[order.front()];
  const int d = domain.dim();
  optim::AscentOptions opts;
  opts.max_iterations = options.max_iterations;
  opts.learning_rate = options.learning_rate;
  auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd* g) {
    const Point x = domain.clamp(domain.from_unit(u));
    Eigen::VectorXd gx;
    const double v = model.mean_and_gradient(x, g ? &gx : nullptr);
    if (g) *g = gx.cwiseProduct(domain.width());
    return v;
  };
  const std::size_t starts = std::min<std::size_t>(options.restarts, order.size());
  for (std::size_t s = 0; s < starts && options.max_iterations > 0; ++s) {
    const auto r = optim::projected_ascent(objective, domain.to_unit(cands[order[s]]), Eigen::VectorXd::Zero(d),
                                           Eigen::VectorXd::Ones(d), opts);
    if (r.value > best_v) {
      const Point x = domain.clamp(domain.from_unit(r.x));
      const double v = model.mean_at(x);
      if (v > best_v) {
        best_v = v;
        best = x;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

void BenchConfig::validate() const {
  acquisition.validate();
  if (n_queries < 1) throw InvalidArgument("bench: n_queries must be >= 1");
  if (n_replications < 1) throw InvalidArgument("bench: n_replications must be >= 1");
  if (refit_every < 1) throw InvalidArgument("bench: refit_every must be >= 1");
  if (hyper_restarts < 1) throw InvalidArgument("bench: hyper_restarts must be >= 1");
  if (noise_level && !(*noise_level >= 0.0)) throw InvalidArgument("bench: noise level must be >= 0");
  if (!noise_level && !(noise_target > 0.0 && noise_target < 0.5))
    throw InvalidArgument("bench: noise target must lie in (0, 1/2)");
  if (seeded_anchor && seeded_anchor->comparisons < 1) throw InvalidArgument("bench: seeded comparisons must be >= 1");
}

TestProblem resolve_problem(const BenchConfig& cfg) {
  return cfg.problem_spec ? problem_from_json(*cfg.problem_spec) : make_problem(cfg.problem);
}

double resolve_noise_level(const BenchConfig& cfg, const TestProblem& problem) {
  if (cfg.noise_level) return *cfg.noise_level;
  Rng rng(derive_seed(cfg.seed, {stream_tag("calibration")}));
  return calibrate_noise(problem, cfg.noise_target, rng);
}

RegretTrace run_replication(const BenchConfig& cfg, const TestProblem& problem, double noise_level,
                            std::uint64_t seed) {
  cfg.validate();
  if (!problem.optimum) throw InvalidArgument("bench: problem '" + problem.name + "' has no known optimum");
  const Domain& domain = problem.domain;
  const double f_star = problem.optimum->value;
  const int q = cfg.acquisition.q;

  RegretTrace trace;
  trace.seed = seed;
  Rng design_rng(derive_seed(seed, {stream_tag("design")}));
  Rng acq_rng(derive_seed(seed, {stream_tag("acquisition")}));
  Rng rec_rng(derive_seed(seed, {stream_tag("recommend")}));
  SimulatedDM dm(problem.utility, noise_level, derive_seed(seed, {stream_tag("dm")}));

  try {
    PreferenceDataset ds(q);
    if (cfg.seeded_anchor) {
      if (!domain.contains(cfg.seeded_anchor->anchor)) throw InvalidArgument("bench: seeded anchor outside domain");
      for (int k = 0; k < cfg.seeded_anchor->comparisons; ++k) {
        Query X;
        X.points.push_back(cfg.seeded_anchor->anchor);
        for (int i = 1; i < q; ++i) X.points.push_back(domain.sample(design_rng));
        ds = ds.appended(X, simulate_response(dm, X));
      }
    } else {
      ds = initial_design(problem, q, dm, design_rng);
    }

    HyperFitConfig fit_cfg = HyperFitConfig::defaults(domain);
    fit_cfg.restarts = cfg.hyper_restarts;
    fit_cfg.max_evaluations = cfg.hyper_max_evaluations;
    Hyperparameters hyper = Hyperparameters::defaults(domain);
    auto refit = [&](int n) {
      fit_cfg.seed = derive_seed(seed, {stream_tag("fit"), static_cast<std::uint64_t>(n)});
      fit_cfg.init = hyper;
      hyper = fit_hyperparameters(ds, fit_cfg);
    };
    refit(0);
    PosteriorModel model = fit_laplace(ds, hyper);

    for (int n = 0;; ++n) {
      const Point rec = recommend(model, domain, rec_rng, cfg.recommend);
      trace.recommended.push_back(rec);
      trace.regret.push_back(f_star - problem.utility(rec));
      if (n == 0) trace.acq_seconds.push_back(0.0);
      if (n == cfg.n_queries) break;

      const auto t0 = std::chrono::steady_clock::now();
      const Query X = next_query(model, cfg.acquisition, domain, ds, acq_rng);
      trace.acq_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      ds = ds.appended(X, simulate_response(dm, X));
      if ((n + 1) % cfg.refit_every == 0) refit(n + 1);
      model = fit_laplace(ds, hyper);
    }
  } catch (const Error& e) {
    trace.failed = true;
    trace.failure = e.what();
    trace.acq_seconds.resize(trace.regret.size(), 0.0);
  }
  return trace;
}

RegretTrace run_replication(const BenchConfig& cfg, std::uint64_t seed) {
  const TestProblem problem = resolve_problem(cfg);
  return run_replication(cfg, problem, resolve_noise_level(cfg, problem), seed);
}

std::vector<RegretTrace> run_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  const TestProblem problem = resolve_problem(cfg);
  const double lambda = resolve_noise_level(cfg, problem);
  std::vector<RegretTrace> out;
  for (int r = 0; r < cfg.n_replications; ++r)
    out.push_back(run_replication(cfg, problem, lambda, cfg.seed + static_cast<std::uint64_t>(r)));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double log10_clamped(double regret) { return std::log10(std::max(regret, 1e-12)); }

}  // namespace

Summary aggregate(const std::vector<RegretTrace>& traces) {
  if (traces.empty()) throw InvalidArgument("aggregate: no traces");
  const std::size_t len = traces.front().regret.size();
  for (const auto& t : traces)
    if (t.regret.size() != len) throw InvalidArgument("aggregate: traces differ in length");
  const double R = static_cast<double>(traces.size());
  Summary s;
  s.replications = static_cast<int>(traces.size());
  for (std::size_t i = 0; i < len; ++i) {
    double mean = 0.0;
    for (const auto& t : traces) mean += log10_clamped(t.regret[i]);
    mean /= R;
    double var = 0.0;
    if (traces.size() > 1) {
      for (const auto& t : traces) var += std::pow(log10_clamped(t.regret[i]) - mean, 2);
      var /= (R - 1.0);
    }
    s.rows.push_back({static_cast<int>(i), mean, 1.96 * std::sqrt(var) / std::sqrt(R)});
  }
  double total = 0.0;
  int count = 0;
  for (const auto& t : traces)
    for (std::size_t i = 1; i < t.acq_seconds.size(); ++i) {
      total += t.acq_seconds[i];
      ++count;
    }
  s.mean_acq_seconds = count ? total / count : 0.0;
  return s;
}

void write_csv(std::ostream& out, const BenchConfig& cfg, const std::vector<RegretTrace>& traces) {
  const std::string problem = cfg.problem_spec ? problem_from_json(*cfg.problem_spec).name : cfg.problem;
  std::vector<const RegretTrace*> sorted;
  for (const auto& t : traces) sorted.push_back(&t);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->seed < b->seed; });
  out << kCsvHeader << '\n';
  out << std::setprecision(17);
  for (const auto* t : sorted) {
    for (std::size_t i = 0; i < t->regret.size(); ++i) {
      out << problem << ',' << to_string(cfg.acquisition.kind) << ',' << cfg.acquisition.q << ','
          << cfg.noise_target << ',' << t->seed << ',' << i << ',' << t->regret[i] << ','
          << log10_clamped(t->regret[i]) << ',' << (i < t->acq_seconds.size() ? t->acq_seconds[i] : 0.0) << '\n';
    }
  }
}

std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw InvalidArgument("csv: unexpected header '" + line + "'");
  std::vector<CsvRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw InvalidArgument("csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    try {
      rows.push_back({f[0], f[1], std::stoi(f[2]), std::stod(f[3]), std::stoull(f[4]), std::stoi(f[5]),
                      std::stod(f[6]), std::stod(f[7]), std::stod(f[8])});
    } catch (const std::exception&) {
      throw InvalidArgument("csv: malformed number on line " + std::to_string(lineno));
    }
  }
  return rows;
}

}  // namespace pbo
