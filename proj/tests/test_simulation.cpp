#include "pbo/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pbo;

namespace {

Point pt(std::initializer_list<double> v) {
  Point x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

// Straight-line Hartmann 6-d (maximization sign) with the published tables.
double hartmann6_reference(const double x[6]) {
  const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  const double A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                          {0.05, 10, 17, 0.1, 8, 14},
                          {3, 3.5, 1.7, 10, 17, 8},
                          {17, 8, 0.05, 10, 0.1, 14}};
  const double P[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                          {2329, 4135, 8307, 3736, 1004, 9991},
                          {2348, 1451, 3522, 2883, 3047, 6650},
                          {4047, 8828, 8732, 5743, 1091, 381}};
  double outer = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 6; ++j) inner += A[i][j] * (x[j] - 1e-4 * P[i][j]) * (x[j] - 1e-4 * P[i][j]);
    outer += alpha[i] * std::exp(-inner);
  }
  return outer;
}

std::vector<double> choice_frequencies(const std::vector<double>& u, double lambda, int draws, std::uint64_t seed) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < u.size(); ++i) pts.push_back(pt({static_cast<double>(i)}));
  SimulatedDM dm([&u](const Point& x) { return u[static_cast<std::size_t>(x[0])]; }, lambda, seed);
  std::vector<int> count(u.size(), 0);
  for (int k = 0; k < draws; ++k) ++count[simulate_response(dm, Query{pts}).choice];
  std::vector<double> freq;
  for (int c : count) freq.push_back(static_cast<double>(c) / draws);
  return freq;
}

}  // namespace

TEST(Problems, AckleyAndAlpineOptimaAtOrigin) {
  EXPECT_NEAR(ackley_utility(Point::Zero(6)), 0.0, 1e-12);
  EXPECT_EQ(alpine1_utility(Point::Zero(7)), 0.0);
  const TestProblem a = make_problem("ackley6");
  EXPECT_LT(eval_problem(a, Point::Constant(6, 0.5)), 0.0);
  EXPECT_EQ(make_problem("alpine1-7").domain.dim(), 7);
}

TEST(Problems, HartmannMatchesReference) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    double x[6];
    Point p(6);
    for (int j = 0; j < 6; ++j) p[j] = x[j] = rng.uniform();
    EXPECT_NEAR(hartmann6_utility(p), hartmann6_reference(x), 1e-10);
  }
  const TestProblem h = make_problem("hartmann6");
  ASSERT_TRUE(h.optimum.has_value());
  EXPECT_NEAR(eval_problem(h, h.optimum->point), h.optimum->value, 1e-5);
}

TEST(Problems, UnknownAndOutOfDomain) {
  EXPECT_THROW(make_problem("branin"), InvalidArgument);
  EXPECT_THROW(eval_problem(make_problem("hartmann6"), Point::Constant(6, 1.5)), InvalidArgument);
}

TEST(Problems, QuadraticFromJson) {
  const TestProblem p = problem_from_json(
      {{"kind", "quadratic"}, {"lower", {0.0, 0.0}}, {"upper", {2.0, 1.0}}, {"center", {1.0, 0.25}}, {"scale", 3.0}});
  EXPECT_DOUBLE_EQ(eval_problem(p, pt({1.0, 0.25})), 0.0);
  EXPECT_DOUBLE_EQ(eval_problem(p, pt({2.0, 0.25})), -3.0 * 0.25);
  ASSERT_TRUE(p.optimum.has_value());
  EXPECT_EQ(p.optimum->point, pt({1.0, 0.25}));
  EXPECT_THROW(problem_from_json({{"kind", "nope"}, {"lower", {0.0}}, {"upper", {1.0}}}), InvalidArgument);
}

TEST(SimulatedDM, NoiseFreeArgmax) {
  const auto f = choice_frequencies({0.3, 0.9}, 0.0, 1000, 1);
  EXPECT_EQ(f[1], 1.0);
}

TEST(SimulatedDM, SoftmaxFrequencies) {
  const auto f = choice_frequencies({1.0, 0.0}, 1.0, 100000, 2);
  EXPECT_NEAR(f[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 0.01);
}

TEST(SimulatedDM, EqualUtilitiesUniform) {
  const auto f = choice_frequencies({0.5, 0.5, 0.5, 0.5}, 0.2, 100000, 3);
  for (double v : f) EXPECT_NEAR(v, 0.25, 0.01);
}

TEST(SimulatedDM, GumbelArgmaxMatchesSoftmaxOverThreeItems) {
  const std::vector<double> u{0.4, 0.1, -0.3};
  const double lambda = 0.25;
  const auto f = choice_frequencies(u, lambda, 100000, 4);
  double z = 0.0;
  for (double v : u) z += std::exp(v / lambda);
  double tv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) tv += 0.5 * std::abs(f[i] - std::exp(u[i] / lambda) / z);
  EXPECT_LE(tv, 0.01);
}

TEST(Calibration, SelfConsistentOnFreshPairs) {
  const TestProblem h = make_problem("hartmann6");
  Rng rng(5);
  const double lambda = calibrate_noise(h, 0.2, rng);
  Rng fresh(6);
  const CalibrationPairs pairs = calibration_pairs(h, fresh);
  EXPECT_NEAR(expected_mistake_rate(pairs, lambda), 0.2, 0.01);
}

TEST(Calibration, MonotoneInTarget) {
  const TestProblem h = make_problem("hartmann6");
  double prev = 1e300;
  for (double target : {0.3, 0.2, 0.1, 0.01, 1e-4}) {
    Rng rng(7);
    const double lambda = calibrate_noise(h, target, rng);
    EXPECT_LT(lambda, prev);
    prev = lambda;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Calibration, ScaleEquivariant) {
  TestProblem base = make_problem("hartmann6");
  TestProblem scaled = base;
  scaled.utility = [](const Point& x) { return 7.0 * hartmann6_utility(x); };
  Rng r1(8), r2(8);
  const double l1 = calibrate_noise(base, 0.2, r1);
  const double l2 = calibrate_noise(scaled, 0.2, r2);
  EXPECT_NEAR(l2 / (7.0 * l1), 1.0, 0.05);
}

TEST(Calibration, RejectsBadTarget) {
  Rng rng(9);
  EXPECT_THROW(calibrate_noise(make_problem("hartmann6"), 0.5, rng), InvalidArgument);
  EXPECT_THROW(calibrate_noise(make_problem("hartmann6"), 0.0, rng), InvalidArgument);
}

TEST(InitialDesign, SizeBoundsDeterminism) {
  const TestProblem h = make_problem("hartmann6");
  SimulatedDM dm1(h.utility, 0.1, 3), dm2(h.utility, 0.1, 3);
  Rng r1(4), r2(4);
  const PreferenceDataset a = initial_design(h, 2, dm1, r1);
  const PreferenceDataset b = initial_design(h, 2, dm2, r2);
  EXPECT_EQ(a.size(), 24u);
  EXPECT_EQ(a, b);
  for (const auto& obs : a.observations())
    for (const auto& x : obs.query.points) EXPECT_TRUE(h.domain.contains(x));
}
