#include "pbo/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pbo {
namespace {

constexpr double kHartmannAlpha[4] = {1.0, 1.2, 3.0, 3.2};
constexpr double kHartmannA[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
constexpr double kHartmannP[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                                     {2329, 4135, 8307, 3736, 1004, 9991},
                                     {2348, 1451, 3522, 2883, 3047, 6650},
                                     {4047, 8828, 8732, 5743, 1091, 381}};

TestProblem ackley(int d) {
  const double b = 32.768;
  return {"ackley" + std::to_string(d),
          Domain::box(Point::Constant(d, -b), Point::Constant(d, b)),
          ackley_utility,
          KnownOptimum{Point::Zero(d), 0.0}};
}

TestProblem alpine1(int d) {
  return {"alpine1-" + std::to_string(d),
          Domain::box(Point::Constant(d, -10.0), Point::Constant(d, 10.0)),
          alpine1_utility,
          KnownOptimum{Point::Zero(d), 0.0}};
}

TestProblem hartmann6() {
  Point opt(6);
  opt << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
  return {"hartmann6", Domain::box(Point::Zero(6), Point::Ones(6)), hartmann6_utility, KnownOptimum{opt, 3.32237}};
}

}  // namespace

double ackley_utility(const Point& x) {
  const double d = static_cast<double>(x.size());
  const double sq = x.squaredNorm() / d;
  const double cs = (2.0 * std::numbers::pi * x.array()).cos().sum() / d;
  return -(-20.0 * std::exp(-0.2 * std::sqrt(sq)) - std::exp(cs) + 20.0 + std::numbers::e);
}

double alpine1_utility(const Point& x) {
  return -(x.array() * x.array().sin() + 0.1 * x.array()).abs().sum();
}

double hartmann6_utility(const Point& x) {
  if (x.size() != 6) throw InvalidArgument("hartmann6: expects a 6-dimensional point");
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double diff = x[j] - 1e-4 * kHartmannP[i][j];
      inner += kHartmannA[i][j] * diff * diff;
    }
    total += kHartmannAlpha[i] * std::exp(-inner);
  }
  return total;
}

std::vector<std::string> builtin_problem_names() { return {"ackley6", "alpine1-7", "hartmann6"}; }

TestProblem make_problem(const std::string& name) {
  if (name == "ackley6") return ackley(6);
  if (name == "alpine1-7") return alpine1(7);
  if (name == "hartmann6") return hartmann6();
  throw InvalidArgument("unknown problem '" + name + "' (expected ackley6|alpine1-7|hartmann6)");
}

TestProblem problem_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw InvalidArgument("problem: expected an object with a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  TestProblem p;
  if (kind == "hartmann6") {
    p = hartmann6();
  } else {
    const Domain dom = Domain::box(point_from_json(j.at("lower")), point_from_json(j.at("upper")));
    const int d = dom.dim();
    if (kind == "ackley") {
      p = ackley(d);
    } else if (kind == "alpine1") {
      p = alpine1(d);
    } else if (kind == "quadratic") {
      const Point center = j.contains("center") ? point_from_json(j.at("center")) : Point((dom.lower() + dom.upper()) / 2);
      if (center.size() != d) throw InvalidArgument("problem: center dimension mismatch");
      const double scale = j.value("scale", 1.0);
      const Point width = dom.width();
      p.name = "quadratic" + std::to_string(d);
      p.utility = [center, scale, width](const Point& x) {
        return -scale * (x - center).cwiseQuotient(width).squaredNorm();
      };
      if (dom.contains(center)) p.optimum = KnownOptimum{center, 0.0};
    } else {
      throw InvalidArgument("problem: unknown kind '" + kind + "'");
    }
    p.domain = dom;
    if (p.optimum && !dom.contains(p.optimum->point)) p.optimum.reset();
  }
  if (j.contains("name")) p.name = j.at("name").get<std::string>();
  return p;
}

double eval_problem(const TestProblem& problem, const Point& x) {
  if (!problem.domain.contains(x)) throw InvalidArgument("eval_problem: point outside the domain of " + problem.name);
  return problem.utility(x);
}

// ---------------------------------------------------------------------------

SimulatedDM::SimulatedDM(std::function<double(const Point&)> u, double noise, std::uint64_t seed)
    : utility(std::move(u)), noise_level(noise), rng(seed) {
  if (!(noise >= 0.0)) throw InvalidArgument("simulated DM: λ must be >= 0");
}

Response simulate_response(SimulatedDM& dm, const Query& X) {
  if (X.size() < 1) throw InvalidArgument("simulate_response: empty query");
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < X.size(); ++i) {
    double v = dm.utility(X.points[i]);
    if (dm.noise_level > 0.0) v += dm.noise_level * dm.rng.gumbel();
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return Response{best};
}

CalibrationPairs calibration_pairs(const TestProblem& problem, Rng& rng, int grid, double top_fraction, int pairs) {
  if (grid < 2 || !(top_fraction > 0.0 && top_fraction <= 1.0) || pairs < 1)
    throw InvalidArgument("calibration: invalid grid/top_fraction/pairs");
  std::vector<double> u(grid);
  for (auto& v : u) v = problem.utility(problem.domain.sample(rng));
  const std::size_t keep = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(top_fraction * grid)));
  std::partial_sort(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(keep), u.end(), std::greater<>());
  u.resize(keep);
  CalibrationPairs out;
  out.gaps.reserve(pairs);
  for (int k = 0; k < pairs; ++k) {
    const std::size_t i = rng.index(keep);
    std::size_t j = rng.index(keep - 1);
    if (j >= i) ++j;
    out.gaps.push_back(std::abs(u[i] - u[j]));
  }
  return out;
}

double expected_mistake_rate(const CalibrationPairs& pairs, double noise_level) {
  if (!(noise_level >= 0.0)) throw InvalidArgument("mistake rate: λ must be >= 0");
  if (pairs.gaps.empty()) throw InvalidArgument("mistake rate: no pairs");
  double total = 0.0;
  for (double g : pairs.gaps) {
    if (g <= 0.0 || noise_level == 0.0) continue;
    total += 1.0 / (1.0 + std::exp(g / noise_level));
  }
  return total / static_cast<double>(pairs.gaps.size());
}

double calibrate_noise(const TestProblem& problem, double target, Rng& rng) {
  if (!(target > 0.0 && target < 0.5)) throw InvalidArgument("calibrate_noise: target must lie in (0, 1/2)");
  const CalibrationPairs pairs = calibration_pairs(problem, rng);
  const double max_gap = *std::max_element(pairs.gaps.begin(), pairs.gaps.end());
  if (!(max_gap > 0.0)) throw InvalidArgument("calibrate_noise: utility is constant on the top set");
  double lo = std::log(max_gap * 1e-9), hi = std::log(max_gap * 1e6);
  if (expected_mistake_rate(pairs, std::exp(hi)) < target)
    throw InvalidArgument("calibrate_noise: target mistake rate is unreachable");
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double rate = expected_mistake_rate(pairs, std::exp(mid));
    if (std::abs(rate - target) <= 1e-4 * target) break;
    (rate < target ? lo : hi) = mid;
  }
  return std::exp(mid);
}

PreferenceDataset initial_design(const TestProblem& problem, int q, SimulatedDM& dm, Rng& rng) {
  if (q < 2) throw InvalidArgument("initial_design: q must be >= 2");
  PreferenceDataset ds(q);
  for (int k = 0; k < 4 * problem.domain.dim(); ++k) {
    Query X;
    for (int i = 0; i < q; ++i) X.points.push_back(problem.domain.sample(rng));
    ds = ds.appended(X, simulate_response(dm, X));
  }
  return ds;
}

}  // namespace pbo
