#include "pbo/acquisition.hpp"
#include "pbo/simulation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace pbo;

namespace {

Point pt(std::initializer_list<double> v) {
  Point x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

PreferenceDataset simulated(const Domain& d, int n, int q, std::uint64_t seed,
                            const std::function<double(const Point&)>& u, double lambda) {
  Rng rng(seed);
  SimulatedDM dm(u, lambda, seed ^ 0x5a5a);
  PreferenceDataset ds(q);
  for (int i = 0; i < n; ++i) {
    Query X;
    for (int j = 0; j < q; ++j) X.points.push_back(d.sample(rng));
    ds = ds.appended(X, simulate_response(dm, X));
  }
  return ds;
}

PosteriorModel model_3d(std::uint64_t seed, int n = 20) {
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  const PreferenceDataset ds =
      simulated(d, n, 2, seed, [](const Point& x) { return -(x.array() - 0.4).square().sum(); }, 0.05);
  Hyperparameters h = Hyperparameters::defaults(d);
  h.lengthscales = Eigen::VectorXd::Constant(3, 0.3);
  h.noise_level = 0.05;
  return fit_laplace(ds, h);
}

Query random_q(const Domain& d, int q, Rng& rng) {
  Query X;
  for (int i = 0; i < q; ++i) X.points.push_back(d.sample(rng));
  return X;
}

// Smallest gap between the best and second-best sample coordinate (and the
// incumbent, for qEI) over all base samples.
double min_sample_gap(const PosteriorModel& m, const Query& X, const BaseSampleSet& base, const double* inc) {
  const GaussianPosterior post = m.posterior_at(X.points);
  const Eigen::MatrixXd L = post.covariance.llt().matrixL();
  double gap = 1e300;
  for (int s = 0; s < base.samples(); ++s) {
    Eigen::VectorXd y = post.mean + L * base.z.row(s).transpose();
    std::vector<double> v(y.data(), y.data() + y.size());
    if (inc) v.push_back(*inc);
    std::sort(v.rbegin(), v.rend());
    gap = std::min(gap, v[0] - v[1]);
  }
  return gap;
}

}  // namespace

TEST(AcquisitionSpec, Validation) {
  AcquisitionSpec s;
  s.q = 1;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = {};
  s.mc_samples = 0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_EQ(acquisition_kind_from_string("qts"), AcquisitionKind::Thompson);
  EXPECT_EQ(acquisition_kind_from_string("thompson"), AcquisitionKind::Thompson);
  EXPECT_THROW(acquisition_kind_from_string("ucb"), InvalidArgument);
  const AcquisitionSpec j = acquisition_spec_from_json({{"algo", "qei"}, {"q", 3}, {"mc_samples", 64}});
  EXPECT_EQ(j.kind, AcquisitionKind::Qei);
  EXPECT_EQ(j.q, 3);
  EXPECT_EQ(j.mc_samples, 64);
  EXPECT_EQ(j.restarts, AcquisitionSpec{}.restarts);
  EXPECT_EQ(acquisition_spec_from_json(acquisition_spec_to_json(j)).kind, AcquisitionKind::Qei);
}

TEST(ClosedForm, StandardPair) {
  EXPECT_NEAR(eubo_closed_form_q2(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity() * 0.5),
              1.0 / std::sqrt(2.0 * M_PI), 1e-12);
  EXPECT_NEAR(eubo_closed_form_q2(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity() * 0.5), 0.39894, 1e-5);
}

TEST(ClosedForm, Deterministic) {
  EXPECT_DOUBLE_EQ(eubo_closed_form_q2(Eigen::Vector2d(3, 0), Eigen::Matrix2d::Zero()), 3.0);
}

TEST(ClosedForm, SwapInvariant) {
  Eigen::Matrix2d c;
  c << 1.2, 0.3, 0.3, 0.5;
  Eigen::Matrix2d cs;
  cs << 0.5, 0.3, 0.3, 1.2;
  EXPECT_DOUBLE_EQ(eubo_closed_form_q2(Eigen::Vector2d(0.2, -0.7), c),
                   eubo_closed_form_q2(Eigen::Vector2d(-0.7, 0.2), cs));
}

TEST(ClosedForm, MatchesBruteForceMonteCarlo) {
  Rng rng(99);
  Eigen::Matrix2d c;
  c << 1.0, 0.6, 0.6, 2.0;
  const Eigen::Vector2d mu(0.3, -0.1);
  const Eigen::Matrix2d L = c.llt().matrixL();
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d y = mu + L * Eigen::Vector2d(rng.normal(), rng.normal());
    sum += y.maxCoeff();
  }
  EXPECT_NEAR(eubo_closed_form_q2(mu, c), sum / n, 5e-3);
}

TEST(ClosedForm, RejectsIndefinite) {
  Eigen::Matrix2d c;
  c << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(eubo_closed_form_q2(Eigen::Vector2d(0, 0), c), InvalidArgument);
}

TEST(Qeubo, SaaMatchesClosedForm) {
  Rng rng(7);
  const BaseSampleSet base = BaseSampleSet::draw(1 << 16, 2, rng);
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  for (std::uint64_t s = 0; s < 5; ++s) {
    const PosteriorModel m = model_3d(s);
    const Query X = random_q(d, 2, rng);
    const GaussianPosterior post = m.posterior_at(X.points);
    const double cf = eubo_closed_form_q2(post.mean, post.covariance);
    EXPECT_NEAR(qeubo_value(m, X, base), cf, 5e-3 * std::sqrt(m.hyper().outputscale));
  }
}

TEST(Qeubo, IdenticalPointsGiveMeanPlusBaseAverage) {
  Rng rng(1);
  const BaseSampleSet base = BaseSampleSet::draw(128, 3, rng);
  const PosteriorModel m = model_3d(1);
  const Point x = pt({0.3, 0.2, 0.9});
  const GaussianPosterior p = m.posterior_at({x});
  const double v = qeubo_value(m, Query{{x, x, x}}, base);
  const double sd = std::sqrt(p.covariance(0, 0));
  EXPECT_NEAR(v, p.mean[0] + sd * base.z.col(0).mean(), 1e-12);
  EXPECT_NEAR(v, p.mean[0], 3.0 * sd / std::sqrt(128.0));
}

TEST(Qeubo, DominatesEachMean) {
  Rng rng(2);
  const BaseSampleSet base = BaseSampleSet::draw(256, 2, rng);
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  const PosteriorModel m = model_3d(2);
  for (int t = 0; t < 20; ++t) {
    const Query X = random_q(d, 2, rng);
    const GaussianPosterior p = m.posterior_at(X.points);
    const double se = std::sqrt(p.covariance.diagonal().maxCoeff() / base.samples());
    EXPECT_GE(qeubo_value(m, X, base), p.mean.maxCoeff() - 3.0 * se);
  }
}

TEST(Qei, SentinelIncumbentAndIdentity) {
  Rng rng(3);
  const BaseSampleSet base = BaseSampleSet::draw(128, 2, rng);
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  const PosteriorModel m = model_3d(3);
  for (int t = 0; t < 10; ++t) {
    const Query X = random_q(d, 2, rng);
    const double eubo = qeubo_value(m, X, base);
    EXPECT_NEAR(qei_value(m, X, -1e6, base), eubo + 1e6, 1e-6);
    const double inc = incumbent_value(m, m.dataset());
    EXPECT_GE(qei_value(m, X, inc, base), eubo - inc);
  }
}

TEST(Qei, HighIncumbentGivesNearZero) {
  Rng rng(4);
  const BaseSampleSet base = BaseSampleSet::draw(128, 2, rng);
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  const PosteriorModel m = model_3d(4);
  const Query X = random_q(d, 2, rng);
  const GaussianPosterior p = m.posterior_at(X.points);
  const double inc = p.mean.maxCoeff() + 10.0 * std::sqrt(p.covariance.diagonal().maxCoeff());
  EXPECT_LE(qei_value(m, X, inc, base), 1e-3 * std::sqrt(m.hyper().outputscale));
}

TEST(Incumbent, MaxOfTwoMeans) {
  const Point a = pt({0.2}), b = pt({0.7});
  PreferenceDataset ds(2);
  ds = ds.appended(Query{{a, b}}, {0});
  Hyperparameters h;
  h.lengthscales = Eigen::VectorXd::Constant(1, 0.3);
  const PosteriorModel m = fit_laplace(ds, h);
  EXPECT_DOUBLE_EQ(incumbent_value(m, ds), std::max(m.mean_at(a), m.mean_at(b)));
  EXPECT_THROW(incumbent_value(m, PreferenceDataset(2)), InvalidArgument);
}

TEST(Incumbent, MonotoneInPointSet) {
  const PosteriorModel m = model_3d(5, 30);
  const PreferenceDataset& ds = m.dataset();
  for (std::size_t n = 1; n < ds.size(); n += 7)
    EXPECT_GE(incumbent_value(m, ds.prefix(n + 1)), incumbent_value(m, ds.prefix(n)));
}

TEST(SaaGradient, MatchesCentralDifferences) {
  Rng rng(5);
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  const PosteriorModel m = model_3d(6);
  const double inc = incumbent_value(m, m.dataset());
  int checked = 0;
  for (int attempt = 0; checked < 20 && attempt < 200; ++attempt) {
    const int q = 2 + attempt % 3;
    const BaseSampleSet base = BaseSampleSet::draw(64, q, rng);
    const Query X = random_q(d, q, rng);
    const bool use_inc = attempt % 2 == 1;
    const double* incp = use_inc ? &inc : nullptr;
    if (min_sample_gap(m, X, base, incp) < 1e-3) continue;
    std::vector<Eigen::VectorXd> g;
    saa_value(m, X, base, incp, &g);
    const double h = 1e-6;
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < 3; ++j) {
        Query P = X, M = X;
        P.points[i][j] += h;
        M.points[i][j] -= h;
        const double fd = (saa_value(m, P, base, incp) - saa_value(m, M, base, incp)) / (2 * h);
        EXPECT_LE(std::abs(g[i][j] - fd), 1e-4 * std::max(1.0, std::abs(fd))) << "point " << i << " coord " << j;
      }
    }
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(Thompson, PriorCoversAllCandidates) {
  const Domain d = Domain::box(Point::Zero(1), Point::Ones(1));
  Hyperparameters h = Hyperparameters::defaults(d);
  const PosteriorModel m = fit_laplace(PreferenceDataset(2), h);
  std::vector<Point> cands;
  for (int i = 0; i < 64; ++i) cands.push_back(pt({(i + 0.5) / 64.0}));
  Rng rng(8);
  std::set<double> chosen;
  for (int rep = 0; rep < 200; ++rep)
    for (const auto& x : thompson_query(m, 2, cands, rng).points) chosen.insert(x[0]);
  EXPECT_EQ(chosen.size(), 64u);
}

TEST(Thompson, ConcentratesNearPreferredPoint) {
  const Domain d = Domain::box(Point::Zero(1), Point::Ones(1));
  const double xstar = 0.3;
  Rng rng(9);
  PreferenceDataset ds(2);
  for (int i = 0; i < 50; ++i) {
    const Point other = d.sample(rng);
    ds = ds.appended(Query{{pt({xstar}), other}}, {0});
  }
  // Unit noise keeps the unanimous answers from saturating the likelihood.
  Hyperparameters h = Hyperparameters::defaults(d);
  h.lengthscales = Eigen::VectorXd::Constant(1, 0.1);
  h.noise_level = 1.0;
  const PosteriorModel m = fit_laplace(ds, h);
  std::vector<Point> cands;
  for (int i = 0; i < 200; ++i) cands.push_back(pt({(i + 0.5) / 200.0}));
  // 10% of candidates nearest x*: |x − x*| < 0.05.
  int near = 0, total = 0;
  for (int rep = 0; rep < 100; ++rep)
    for (const auto& x : thompson_query(m, 2, cands, rng).points) {
      near += std::abs(x[0] - xstar) < 0.05;
      ++total;
    }
  EXPECT_GE(static_cast<double>(near) / total, 0.8);
}

TEST(Thompson, Deterministic) {
  const PosteriorModel m = model_3d(10);
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  Rng r1(4), r2(4);
  const auto c1 = thompson_candidates(d, m.dataset(), 256, r1);
  const auto c2 = thompson_candidates(d, m.dataset(), 256, r2);
  EXPECT_EQ(thompson_query(m, 3, c1, r1), thompson_query(m, 3, c2, r2));
}

TEST(RandomQuery, MomentsAndReproducibility) {
  const Domain d = Domain::box(Point::Zero(2), Point::Ones(2));
  Rng rng(10);
  Point sum = Point::Zero(2);
  for (int i = 0; i < 5000; ++i) {
    const Query X = random_query(d, 2, rng);
    for (const auto& x : X.points) {
      ASSERT_TRUE(d.contains(x));
      sum += x;
    }
  }
  EXPECT_NEAR(sum[0] / 10000, 0.5, 0.02);
  EXPECT_NEAR(sum[1] / 10000, 0.5, 0.02);
  Rng a(1), b(1);
  EXPECT_EQ(random_query(d, 3, a), random_query(d, 3, b));
}

TEST(Optimize, MonotoneMeanPushesToUpperBound) {
  const Domain d = Domain::box(Point::Zero(1), Point::Ones(1));
  Rng rng(11);
  PreferenceDataset ds(2);
  // Noisy answers at the model's noise level. Noise-free answers that the
  // prior already satisfies add almost no curvature under Laplace.
  const double lambda = 0.05;
  SimulatedDM dm([](const Point& x) { return x[0]; }, lambda, 5);
  for (int i = 0; i < 1000; ++i) {
    const Query X{{d.sample(rng), d.sample(rng)}};
    ds = ds.appended(X, simulate_response(dm, X));
  }
  Hyperparameters h;
  h.lengthscales = Eigen::VectorXd::Constant(1, 1.0);
  h.outputscale = 1.0;
  h.noise_level = lambda;
  const PosteriorModel m = fit_laplace(ds, h);
  const auto P = m.posterior_at({pt({1.0}), pt({0.5})});
  ASSERT_LT(P.covariance(0, 0) + P.covariance(1, 1) - 2.0 * P.covariance(0, 1), 0.01);
  for (double x = 0.05; x < 1.0; x += 0.05) ASSERT_GT(m.mean_at(pt({x})), m.mean_at(pt({x - 0.05})));
  AcquisitionSpec spec;
  const Query X = optimize_acquisition(m, spec, d, ds, rng);
  for (const auto& x : X.points) EXPECT_GE(x[0], 1.0 - 1e-2);
}

TEST(Optimize, DominatesReplicatedMeanMaximizer) {
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  const PosteriorModel m = model_3d(12);
  AcquisitionSpec spec;
  spec.mc_samples = 64;
  Rng rng(12);
  const Query X = optimize_acquisition(m, spec, d, m.dataset(), rng);

  // Replay the optimizer's stream: base samples first, then the raw candidates.
  Rng replay(12);
  const BaseSampleSet base = BaseSampleSet::draw(spec.mc_samples, spec.q, replay);
  std::vector<Point> scored = m.dataset().distinct_points();
  for (int k = 0; k < spec.raw_candidates; ++k)
    for (const auto& x : random_query(d, spec.q, replay).points) scored.push_back(x);
  Point best = scored.front();
  for (const auto& x : scored)
    if (m.mean_at(x) > m.mean_at(best)) best = x;
  EXPECT_GE(qeubo_value(m, X, base), qeubo_value(m, Query{{best, best}}, base) - 1e-12);
  validate_query(d, X);
}

TEST(Optimize, FiniteDomainMatchesEnumeration) {
  std::vector<Point> alts;
  for (int i = 0; i < 5; ++i) alts.push_back(pt({0.1 * i + 0.05, 0.3 * (i % 2)}));
  const Domain d = Domain::finite(alts);
  Rng drng(13);
  PreferenceDataset ds(2);
  SimulatedDM dm([](const Point& x) { return x[0] - x[1]; }, 0.1, 3);
  for (int i = 0; i < 6; ++i) {
    const Query X{{alts[drng.index(5)], alts[drng.index(5)]}};
    ds = ds.appended(X, simulate_response(dm, X));
  }
  Hyperparameters h = Hyperparameters::defaults(d);
  const PosteriorModel m = fit_laplace(ds, h);
  for (AcquisitionKind kind : {AcquisitionKind::Qeubo, AcquisitionKind::Qei}) {
    AcquisitionSpec spec;
    spec.kind = kind;
    Rng rng(14);
    const Query X = optimize_acquisition(m, spec, d, ds, rng);
    Rng replay(14);
    const BaseSampleSet base = BaseSampleSet::draw(spec.mc_samples, 2, replay);
    const double inc = incumbent_value(m, ds);
    const double* incp = kind == AcquisitionKind::Qei ? &inc : nullptr;
    double best = -1e300;
    for (const auto& a : alts)
      for (const auto& b : alts) best = std::max(best, saa_value(m, Query{{a, b}}, base, incp));
    EXPECT_DOUBLE_EQ(saa_value(m, X, base, incp), best);
  }
}

TEST(NextQuery, DispatchIsSeedDeterministic) {
  const Domain d = Domain::box(Point::Zero(3), Point::Ones(3));
  const PosteriorModel m = model_3d(15);
  for (const char* name : {"qeubo", "qei", "qts", "random"}) {
    AcquisitionSpec spec;
    spec.kind = acquisition_kind_from_string(name);
    spec.mc_samples = 32;
    spec.restarts = 4;
    spec.raw_candidates = 64;
    spec.ts_candidates = 128;
    spec.rff_features = 200;
    Rng a(20), b(20);
    const Query X = next_query(m, spec, d, m.dataset(), a);
    EXPECT_EQ(X, next_query(m, spec, d, m.dataset(), b)) << name;
    EXPECT_EQ(X.size(), 2);
    validate_query(d, X);
  }
}
