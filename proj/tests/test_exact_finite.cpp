#include "pbo/exact_finite.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pbo;
using namespace pbo::exact;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

// Independent Lambert W: bisection on w·eʷ = z over [−1, max(1, z)].
double lambert_w_bisect(double z) {
  double lo = -1.0, hi = std::max(1.0, z);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::exp(mid) < z ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(ExactUpdate, IdenticalFactorLeavesWeights) {
  const auto s = make_state(rows({{1.0, 0.0}, {0.5, 0.2}}), vec({0.3, 0.7}), Likelihood::constant_correct(0.9));
  const auto post = exact_update(s, {0, 1}, 0);
  EXPECT_NEAR(post.weights[0], 0.3, 1e-15);
  EXPECT_NEAR(post.weights[1], 0.7, 1e-15);
}

TEST(ExactUpdate, SoftmaxHandExample) {
  const auto s = make_state(rows({{1.0, 0.0}, {0.0, 1.0}}), vec({0.5, 0.5}), Likelihood::softmax(1.0));
  const auto post = exact_update(s, {0, 1}, 0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(post.weights[0], e / (e + 1.0), 1e-14);
  EXPECT_NEAR(post.weights[1], 1.0 / (e + 1.0), 1e-14);
  EXPECT_NEAR(post.weights[0], 0.73106, 1e-5);
}

TEST(ExactUpdate, ZeroProbabilityThrows) {
  const auto s = make_state(rows({{1.0, 0.0}, {2.0, 0.0}}), vec({0.5, 0.5}), Likelihood::softmax(0.0));
  EXPECT_THROW(exact_update(s, {0, 1}, 1), NumericalError);
}

TEST(ExactUpdate, Theorem4RatiosPreserved) {
  const auto prior = theorem4_prior(0.2, 0.75);
  const auto post = exact_update(prior, {2, 3}, 0);
  EXPECT_NEAR(post.weights[0] / post.weights[2], prior.weights[0] / prior.weights[2], 1e-12);
  EXPECT_NEAR(post.weights[1] / post.weights[3], prior.weights[1] / prior.weights[3], 1e-12);
}

TEST(ExactUpdate, Theorem4InitialObservationIsUninformative) {
  const auto prior = theorem4_prior(0.2, 0.75);
  const auto post = exact_update(prior, kTheorem4InitialQuery, kTheorem4InitialResponse);
  EXPECT_EQ((post.weights - prior.weights).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ExactQei, Theorem4InitialValues) {
  const auto s = theorem4_prior(0.2, 0.75);
  const double inc = 0.0;  // best posterior mean among queried {1, 2}: alternative 2 with mean 0
  EXPECT_NEAR(exact_qei(s, {1, 2}, inc), 0.15, 1e-15);
  EXPECT_NEAR(exact_qei(s, {2, 3}, inc), 0.20, 1e-15);
  EXPECT_NEAR(exact_qei(s, {3, 1}, inc), 0.15, 1e-15);
}

TEST(ExactQeubo, SingleHypothesisIsMax) {
  const auto s = make_state(rows({{0.3, -1.0, 0.8, 0.1}}), vec({1.0}), Likelihood::softmax(0.2));
  for (const auto& X : enumerate_queries(4, 2)) {
    double mx = -1e300;
    for (int i : X) mx = std::max(mx, s.utilities(0, i));
    EXPECT_DOUBLE_EQ(exact_qeubo(s, X), mx);
    EXPECT_DOUBLE_EQ(exact_v(s, X), 0.8);
  }
}

TEST(ExactQeubo, DominatesPosteriorMeans) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_instance(rng, Likelihood::softmax(0.1));
    for (const auto& X : enumerate_queries(s.num_alternatives(), 2))
      for (int i : X) EXPECT_GE(exact_qeubo(s, X), exact_posterior_mean(s, i) - 1e-12);
  }
}

TEST(ExactV, NoiseFreeBounds) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto s = random_instance(rng, Likelihood::softmax(0.0));
    const double best_mean = exact_posterior_means(s).maxCoeff();
    for (int q : {2, 3})
      for (const auto& X : enumerate_queries(s.num_alternatives(), q)) {
        EXPECT_GE(exact_v(s, X), exact_qeubo(s, X) - 1e-12);
        EXPECT_GE(exact_v(s, X), best_mean - 1e-12);
      }
  }
}

TEST(ExactV, ResponseProbabilitiesSumToOne) {
  Rng rng(3);
  const auto s = random_instance(rng, Likelihood::softmax(0.3));
  for (const auto& X : enumerate_queries(s.num_alternatives(), 3)) {
    double total = 0.0;
    for (int r = 0; r < 3; ++r) total += response_probability(s, X, r);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(LambertW, ReferenceValues) {
  EXPECT_EQ(lambert_w(0.0), 0.0);
  EXPECT_NEAR(lambert_w(std::exp(1.0)), 1.0, 1e-14);
  EXPECT_NEAR(lambert_w(std::exp(-1.0)), 0.27846, 1e-5);
  EXPECT_NEAR(lambert_w(-std::exp(-1.0)), -1.0, 1e-6);
  EXPECT_THROW(lambert_w(-0.5), InvalidArgument);
}

TEST(LambertW, ResidualAndBisectionOracle) {
  for (double z : {1e-8, 0.01, 0.1, 0.3678794411714423, 1.0, 2.0, 10.0, 1e3, 1e6}) {
    const double w = lambert_w(z);
    EXPECT_NEAR(w * std::exp(w), z, 1e-12 * std::max(1.0, z));
    EXPECT_NEAR(w, lambert_w_bisect(z), 1e-10 * std::max(1.0, std::abs(w)));
  }
}

TEST(Enumerate, LexicographicOrder) {
  const auto qs = enumerate_queries(3, 2);
  ASSERT_EQ(qs.size(), 9u);
  EXPECT_EQ(qs.front(), (IndexQuery{0, 0}));
  EXPECT_EQ(qs[1], (IndexQuery{0, 1}));
  EXPECT_EQ(qs.back(), (IndexQuery{2, 2}));
  EXPECT_EQ(enumerate_queries(3, 3).size(), 27u);
}

TEST(Argmax, TieTolerance) {
  EXPECT_EQ(argmax_set({1.0, 1.0 + 5e-10, 0.5}), (std::vector<int>{0, 1}));
  EXPECT_EQ(argmax_set({1.0, 1.0 + 5e-9}), (std::vector<int>{1}));
  EXPECT_EQ(first_argmax(std::vector<double>{0.2, 0.7, 0.7}), 1);
}

TEST(Theorem1, FourAlternativesThreeHypotheses) {
  Rng rng(4);
  int done = 0;
  while (done < 30) {
    const auto s = random_instance(rng, Likelihood::softmax(0.0));
    if (s.num_alternatives() != 4 || s.num_hypotheses() != 3) continue;
    EXPECT_TRUE(verify_theorem1(s, 2).pass);
    ++done;
  }
}

TEST(Theorem1, SingleHypothesis) {
  const auto s = make_state(rows({{0.1, 0.9, -0.3}}), vec({1.0}), Likelihood::softmax(0.0));
  const auto r = verify_theorem1(s, 2);
  EXPECT_TRUE(r.pass);
}

TEST(Theorem1, ThreeOfThree) {
  Rng rng(5);
  int done = 0;
  while (done < 10) {
    const auto s = random_instance(rng, Likelihood::softmax(0.0));
    if (s.num_alternatives() != 3) continue;
    EXPECT_TRUE(verify_theorem1(s, 3).pass);
    ++done;
  }
}

TEST(Theorem2, RandomInstances) {
  Rng rng(6);
  const double lambdas[] = {0.05, 0.2, 1.0};
  for (int t = 0; t < 30; ++t) {
    const auto s = random_instance(rng, Likelihood::softmax(lambdas[t % 3]));
    const auto r = verify_theorem2(s, 2);
    EXPECT_TRUE(r.pass) << r.witness.dump();
    EXPECT_NEAR(r.witness.at("C").get<double>(), 0.2784645427610738, 1e-12);
  }
}

TEST(Theorem2, SmallNoiseSlackNonNegative) {
  Rng rng(7);
  for (int t = 0; t < 10; ++t) {
    const auto s = random_instance(rng, Likelihood::softmax(1e-9));
    const auto r = verify_theorem2(s, 2);
    EXPECT_GE(r.witness.at("slack").get<double>(), -1e-9);
  }
}

TEST(LemmaA1, ConstantScores) {
  const auto r = verify_lemma_a1(Eigen::VectorXd::Constant(3, 0.4), 0.5);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.witness.at("slack").get<double>(), 0.5 * lambert_w(2.0 / std::exp(1.0)), 1e-12);
}

TEST(LemmaA1, HandExample) {
  const auto r = verify_lemma_a1(vec({1.0, 0.0}), 1.0);
  EXPECT_TRUE(r.pass);
  const double e = std::exp(1.0);
  EXPECT_NEAR(r.witness.at("lhs").get<double>(), e / (e + 1.0), 1e-12);
  EXPECT_NEAR(r.witness.at("rhs").get<double>(), 1.0 - lambert_w(1.0 / e), 1e-12);
  EXPECT_NEAR(r.witness.at("rhs").get<double>(), 0.72154, 1e-5);
}

TEST(LemmaA2, RandomStates) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto s = random_instance(rng, Likelihood::softmax(0.05 + 0.1 * t));
    EXPECT_TRUE(verify_lemma_a2(s, 2 + t % 2).pass);
  }
}

TEST(Theorem4, QeiStallsExactly) {
  const auto trace = run_theorem4_instance(0.2, 0.75, 100, Policy::Qei);
  ASSERT_EQ(trace.regret.size(), 101u);
  for (std::size_t n = 0; n < trace.regret.size(); ++n) EXPECT_NEAR(trace.regret[n], 0.2, 1e-12);
  for (std::size_t n = 0; n < trace.queries.size(); ++n) EXPECT_EQ(trace.queries[n], (IndexQuery{2, 3})) << n;
  for (int r : trace.recommendations) EXPECT_EQ(r, 1);
}

TEST(Theorem4, QeuboConverges) {
  const auto trace = run_theorem4_instance(0.2, 0.75, 60, Policy::Qeubo, 200, 3);
  ASSERT_EQ(trace.regret.size(), 61u);
  EXPECT_LT(trace.regret[60], 0.02);
  EXPECT_LT(trace.regret[60], trace.regret[0]);
}

TEST(Json, StateAndReport) {
  const auto s = theorem4_prior(0.2, 0.75);
  const json j = state_to_json(s);
  EXPECT_EQ(j.at("weights").size(), 4u);
  const auto r = verify_lemma_a1(vec({0.0, 1.0}), 0.1);
  EXPECT_EQ(report_to_json(r).at("pass").get<bool>(), r.pass);
}
