// pbo: theorem verification, simulated benchmarks, regret plots and the
// session HTTP server.

#include "pbo/bench.hpp"
#include "pbo/exact_finite.hpp"
#include "pbo/http_server.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

int cmd_verify(const std::string& suite, std::uint64_t seed, int trials, int runs, const std::string& report_path) {
  using namespace pbo::exact;
  std::vector<SuiteResult> results;
  const bool all = suite == "all";
  if (all || suite == "theorem1") results.push_back(run_theorem1_suite(seed, trials));
  if (all || suite == "theorem2") results.push_back(run_theorem2_suite(seed, trials));
  if (all || suite == "theorem4") results.push_back(run_theorem4_suite(seed, runs));
  if (all || suite == "lemmas") results.push_back(run_lemma_suite(seed, trials));
  if (results.empty()) throw pbo::InvalidArgument("unknown suite '" + suite + "'");

  int failures = 0;
  pbo::json report = pbo::json::array();
  for (const auto& r : results) {
    std::cout << std::left << std::setw(10) << r.suite << ' ' << (r.failures == 0 ? "PASS" : "FAIL") << "  "
              << r.checks - r.failures << '/' << r.checks << " checks  " << std::fixed << std::setprecision(2)
              << r.seconds << " s\n";
    for (const auto& t : r.reports) {
      if (t.pass && r.suite != "theorem4") continue;
      std::cout << "  " << (t.pass ? "pass " : "FAIL ") << t.theorem << " [" << t.instance << "]";
      if (t.witness.contains("slack")) std::cout << " slack=" << t.witness["slack"].get<double>();
      if (t.witness.contains("regret_at_60")) std::cout << " regret@60=" << t.witness["regret_at_60"].get<double>();
      if (t.witness.contains("max_abs_regret_minus_p"))
        std::cout << " max|regret-p|=" << t.witness["max_abs_regret_minus_p"].get<double>();
      std::cout << '\n';
    }
    failures += r.failures;
    report.push_back(suite_to_json(r));
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) throw pbo::Error("cannot write " + report_path);
    out << report.dump(2) << '\n';
    std::cout << "report written to " << report_path << '\n';
  }
  return failures == 0 ? 0 : 1;
}

int cmd_bench(pbo::BenchConfig cfg, const std::string& algo, const std::string& out_path) {
  cfg.acquisition.kind = pbo::acquisition_kind_from_string(algo);
  cfg.validate();
  const auto problem = pbo::resolve_problem(cfg);
  const double lambda = pbo::resolve_noise_level(cfg, problem);
  std::cerr << "problem " << problem.name << ", algo " << algo << ", q " << cfg.acquisition.q << ", DM lambda "
            << lambda << '\n';
  std::vector<pbo::RegretTrace> traces;
  for (int r = 0; r < cfg.n_replications; ++r) {
    traces.push_back(pbo::run_replication(cfg, problem, lambda, cfg.seed + static_cast<std::uint64_t>(r)));
    const auto& t = traces.back();
    std::cerr << "  replication " << r + 1 << '/' << cfg.n_replications << " seed " << t.seed;
    if (t.failed) std::cerr << " FAILED: " << t.failure << '\n';
    else std::cerr << " final regret " << t.regret.back() << '\n';
  }
  std::vector<pbo::RegretTrace> ok;
  for (const auto& t : traces)
    if (!t.failed) ok.push_back(t);
  if (!ok.empty()) {
    const auto s = pbo::aggregate(ok);
    std::cout << "final mean log10 regret " << s.rows.back().mean_log10_regret << " +/- " << s.rows.back().half_width
              << ", mean acquisition time " << s.mean_acq_seconds << " s/query\n";
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw pbo::Error("cannot write " + out_path);
    pbo::write_csv(out, cfg, traces);
  } else {
    pbo::write_csv(std::cout, cfg, traces);
  }
  return ok.size() == traces.size() ? 0 : 1;
}

int cmd_plot(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw pbo::Error("cannot read " + in_path);
  const std::string svg = pbo::regret_plot_svg(pbo::read_csv(in));
  std::ofstream out(out_path);
  if (!out) throw pbo::Error("cannot write " + out_path);
  out << svg;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preferential Bayesian optimization toolkit"};
  app.require_subcommand(1);

  std::string suite = "all", report_path;
  std::uint64_t verify_seed = 0;
  int trials = 100, runs = 500;
  auto* verify = app.add_subcommand("verify", "Exact finite-domain theorem and lemma checks");
  verify->add_option("--suite", suite, "theorem1|theorem2|theorem4|lemmas|all")
      ->check(CLI::IsMember({"theorem1", "theorem2", "theorem4", "lemmas", "all"}));
  verify->add_option("--seed", verify_seed, "Root seed");
  verify->add_option("--trials", trials, "Random instances per fuzz suite")->check(CLI::PositiveNumber);
  verify->add_option("--runs", runs, "Simulated runs for the qEUBO trace")->check(CLI::PositiveNumber);
  verify->add_option("--report", report_path, "JSON report file");

  pbo::BenchConfig bench_cfg;
  std::string algo = "qeubo", bench_out, problem_json;
  double noise_level = -1.0;
  std::vector<double> anchor;
  int anchor_comparisons = 20;
  auto* bench = app.add_subcommand("bench", "Replicated simulated-DM benchmark");
  bench->add_option("--problem", bench_cfg.problem, "ackley6|alpine1-7|hartmann6");
  bench->add_option("--problem-json", problem_json, "Custom problem spec file");
  bench->add_option("--algo", algo, "qeubo|qei|qts|random")->check(CLI::IsMember({"qeubo", "qei", "qts", "random"}));
  bench->add_option("--q", bench_cfg.acquisition.q, "Alternatives per query")->check(CLI::Range(2, 64));
  bench->add_option("--queries", bench_cfg.n_queries, "Queries after the initial design");
  bench->add_option("--reps", bench_cfg.n_replications, "Replications");
  bench->add_option("--noise", bench_cfg.noise_target, "Target comparison-mistake rate");
  bench->add_option("--noise-level", noise_level, "Explicit DM lambda (skips calibration)");
  bench->add_option("--seed", bench_cfg.seed, "Seed of the first replication");
  bench->add_option("--mc-samples", bench_cfg.acquisition.mc_samples, "SAA base samples");
  bench->add_option("--restarts", bench_cfg.acquisition.restarts, "Acquisition restarts");
  bench->add_option("--raw-candidates", bench_cfg.acquisition.raw_candidates, "Raw acquisition candidates");
  bench->add_option("--hyper-restarts", bench_cfg.hyper_restarts, "Hyperparameter fit restarts");
  bench->add_option("--hyper-evals", bench_cfg.hyper_max_evaluations, "Objective evaluations per fit restart");
  bench->add_option("--refit-every", bench_cfg.refit_every, "Hyperparameter refit period");
  bench->add_option("--anchor", anchor, "Seed the data with comparisons against this point (comma separated)")
      ->delimiter(',');
  bench->add_option("--anchor-comparisons", anchor_comparisons, "Comparisons against --anchor")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "CSV output file (stdout if omitted)");

  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plot", "Regret-curve SVG from a bench CSV");
  plot->add_option("--in", plot_in, "CSV file")->required();
  plot->add_option("--out", plot_out, "SVG file")->required();

  int port = 8080;
  std::string host = "127.0.0.1", data_dir = "pbo-data";
  auto* serve = app.add_subcommand("serve", "HTTP session service");
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--data-dir", data_dir, "Journal directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return cmd_verify(suite, verify_seed, trials, runs, report_path);
    if (*bench) {
      if (!problem_json.empty()) {
        std::ifstream in(problem_json);
        if (!in) throw pbo::Error("cannot read " + problem_json);
        bench_cfg.problem_spec = pbo::json::parse(in);
      }
      if (noise_level >= 0.0) bench_cfg.noise_level = noise_level;
      if (!anchor.empty())
        bench_cfg.seeded_anchor =
            pbo::SeededAnchor{Eigen::Map<const Eigen::VectorXd>(anchor.data(), static_cast<Eigen::Index>(anchor.size())),
                              anchor_comparisons};
      return cmd_bench(bench_cfg, algo, bench_out);
    }
    if (*plot) return cmd_plot(plot_in, plot_out);
    if (*serve) {
      pbo::run_http_server(host, port, data_dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "pbo: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
