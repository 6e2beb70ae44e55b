#include "pbo/acquisition.hpp"

#include "pbo/linalg.hpp"
#include "pbo/optim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace pbo {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::VectorXd flatten_unit(const Domain& domain, const Query& X) {
  const int d = domain.dim();
  Eigen::VectorXd u(X.size() * d);
  for (int i = 0; i < X.size(); ++i) u.segment(i * d, d) = domain.to_unit(X.points[i]);
  return u;
}

Query unflatten_unit(const Domain& domain, const Eigen::VectorXd& u, int q) {
  const int d = domain.dim();
  Query X;
  for (int i = 0; i < q; ++i) X.points.push_back(domain.clamp(domain.from_unit(u.segment(i * d, d))));
  return X;
}

double finite_difference_gradient(const PosteriorModel& model, const Query& X, const BaseSampleSet& base,
                                  const double* incumbent, std::vector<Eigen::VectorXd>& grad) {
  grad.assign(X.points.size(), Eigen::VectorXd::Zero(model.dim()));
  const double v0 = saa_value(model, X, base, incumbent, nullptr);
  for (std::size_t i = 0; i < X.points.size(); ++i) {
    for (int c = 0; c < model.dim(); ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(X.points[i][c])) * model.hyper().lengthscales[c] /
                       std::max(model.hyper().lengthscales[c], 1e-300);
      Query Xp = X, Xm = X;
      Xp.points[i][c] += h;
      Xm.points[i][c] -= h;
      grad[i][c] = (saa_value(model, Xp, base, incumbent, nullptr) - saa_value(model, Xm, base, incumbent, nullptr)) /
                   (2.0 * h);
    }
  }
  return v0;
}

constexpr std::array<int, 40> kPrimes = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,
                                         47,  53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107,
                                         109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173};

double radical_inverse(std::uint64_t i, int base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace

std::string to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::Qeubo: return "qeubo";
    case AcquisitionKind::Qei: return "qei";
    case AcquisitionKind::Thompson: return "qts";
    case AcquisitionKind::Random: return "random";
  }
  return "unknown";
}

AcquisitionKind acquisition_kind_from_string(std::string_view name) {
  if (name == "qeubo") return AcquisitionKind::Qeubo;
  if (name == "qei") return AcquisitionKind::Qei;
  if (name == "qts" || name == "thompson") return AcquisitionKind::Thompson;
  if (name == "random") return AcquisitionKind::Random;
  throw InvalidArgument("unknown acquisition '" + std::string(name) + "' (expected qeubo|qei|qts|random)");
}

void AcquisitionSpec::validate() const {
  if (q < 2) throw InvalidArgument("acquisition: q must be >= 2");
  if (mc_samples < 1) throw InvalidArgument("acquisition: mc_samples must be >= 1");
  if (restarts < 1) throw InvalidArgument("acquisition: restarts must be >= 1");
  if (raw_candidates < 1) throw InvalidArgument("acquisition: raw_candidates must be >= 1");
  if (max_iterations < 0) throw InvalidArgument("acquisition: max_iterations must be >= 0");
  if (rff_features < 1 || ts_candidates < 1) throw InvalidArgument("acquisition: Thompson sizes must be >= 1");
}

json acquisition_spec_to_json(const AcquisitionSpec& s) {
  return {{"kind", to_string(s.kind)},       {"q", s.q},
          {"mc_samples", s.mc_samples},      {"restarts", s.restarts},
          {"raw_candidates", s.raw_candidates}, {"max_iterations", s.max_iterations},
          {"learning_rate", s.learning_rate}, {"rff_features", s.rff_features},
          {"ts_candidates", s.ts_candidates}};
}

AcquisitionSpec acquisition_spec_from_json(const json& j) {
  AcquisitionSpec s;
  if (j.contains("kind")) s.kind = acquisition_kind_from_string(j.at("kind").get<std::string>());
  else if (j.contains("algo")) s.kind = acquisition_kind_from_string(j.at("algo").get<std::string>());
  s.q = j.value("q", s.q);
  s.mc_samples = j.value("mc_samples", s.mc_samples);
  s.restarts = j.value("restarts", s.restarts);
  s.raw_candidates = j.value("raw_candidates", s.raw_candidates);
  s.max_iterations = j.value("max_iterations", s.max_iterations);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.rff_features = j.value("rff_features", s.rff_features);
  s.ts_candidates = j.value("ts_candidates", s.ts_candidates);
  s.validate();
  return s;
}

BaseSampleSet BaseSampleSet::draw(int samples, int q, Rng& rng) {
  BaseSampleSet b;
  b.z.resize(samples, q);
  for (int s = 0; s < samples; ++s)
    for (int i = 0; i < q; ++i) b.z(s, i) = rng.normal();
  return b;
}

// ---------------------------------------------------------------------------

double saa_value(const PosteriorModel& model, const Query& X, const BaseSampleSet& base, const double* incumbent,
                 std::vector<Eigen::VectorXd>* grad) {
  const int q = X.size();
  if (base.q() != q) throw InvalidArgument("saa: base sample columns do not match q");
  const GaussianPosterior post = model.posterior_at(X.points);
  const linalg::PsdFactor fac = linalg::psd_cholesky(post.covariance);
  if (grad && !fac.full_rank) return finite_difference_gradient(model, X, base, incumbent, *grad);

  const int n = base.samples();
  const Eigen::MatrixXd S = (base.z * fac.L.transpose()).rowwise() + post.mean.transpose();
  Eigen::VectorXd mu_bar = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd L_bar = Eigen::MatrixXd::Zero(q, q);
  double total = 0.0;
  for (int s = 0; s < n; ++s) {
    int best = 0;
    for (int i = 1; i < q; ++i)
      if (S(s, i) > S(s, best)) best = i;
    double v = S(s, best);
    if (incumbent) {
      v -= *incumbent;
      if (!(v > 0.0)) continue;
    }
    total += v;
    if (grad) {
      mu_bar[best] += 1.0;
      L_bar.row(best).head(best + 1) += base.z.row(s).head(best + 1);
    }
  }
  const double value = total / n;
  if (!grad) return value;

  mu_bar /= n;
  L_bar /= n;
  const Eigen::MatrixXd S_bar = linalg::cholesky_backprop(fac.L, L_bar);

  const auto& h = model.hyper();
  const Eigen::VectorXd inv_sq = h.lengthscales.array().square().inverse();
  const Eigen::Index m = model.num_anchors();
  std::vector<Eigen::VectorXd> kx(q);
  Eigen::MatrixXd V(m, q);
  for (int i = 0; i < q; ++i) {
    kx[i] = model.cross_kernel(X.points[i]);
    V.col(i) = kx[i];
  }
  const Eigen::MatrixXd QV = m > 0 ? Eigen::MatrixXd(model.reduction() * V) : Eigen::MatrixXd(0, q);

  grad->assign(q, Eigen::VectorXd::Zero(model.dim()));
  for (int i = 0; i < q; ++i) {
    Eigen::VectorXd& g = (*grad)[i];
    // Direct kernel terms: ∂k(xᵢ, xⱼ)/∂xᵢ = k · (xⱼ − xᵢ)/ℓ².
    for (int j = 0; j < q; ++j) {
      if (j == i) continue;
      const double kij = post.covariance.size() ? rbf_kernel(X.points[i], X.points[j], h) : 0.0;
      g += 2.0 * S_bar(i, j) * kij * (X.points[j] - X.points[i]).cwiseProduct(inv_sq);
    }
    if (m == 0) continue;
    const Eigen::MatrixXd J = model.cross_kernel_jacobian(X.points[i], kx[i]);
    g += mu_bar[i] * (J.transpose() * model.alpha());
    g -= J.transpose() * (QV * (2.0 * S_bar.row(i).transpose()));
  }
  return value;
}

double qeubo_value(const PosteriorModel& model, const Query& X, const BaseSampleSet& base) {
  return saa_value(model, X, base, nullptr);
}

double qei_value(const PosteriorModel& model, const Query& X, double incumbent, const BaseSampleSet& base) {
  return saa_value(model, X, base, &incumbent);
}

double eubo_closed_form_q2(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov) {
  const double tol = 1e-12 * std::max({1.0, std::abs(cov(0, 0)), std::abs(cov(1, 1))});
  if (std::abs(cov(0, 1) - cov(1, 0)) > tol || cov(0, 0) < -tol || cov(1, 1) < -tol ||
      cov(0, 1) * cov(0, 1) > cov(0, 0) * cov(1, 1) + tol)
    throw InvalidArgument("eubo_closed_form_q2: covariance is not symmetric PSD");
  const double s2 = cov(0, 0) + cov(1, 1) - 2.0 * cov(0, 1);
  const double s = std::sqrt(std::max(s2, 0.0));
  if (s <= 1e-12) return std::max(mean[0], mean[1]);
  const double delta = mean[0] - mean[1];
  const double z = delta / s;
  return mean[0] * linalg::normal_cdf(z) + mean[1] * linalg::normal_cdf(-z) + s * linalg::normal_pdf(z);
}

double incumbent_value(const PosteriorModel& model, const PreferenceDataset& ds) {
  if (ds.empty()) throw InvalidArgument("incumbent_value: dataset is empty");
  double best = kNegInf;
  for (const auto& x : ds.distinct_points()) best = std::max(best, model.mean_at(x));
  return best;
}

// ---------------------------------------------------------------------------

std::vector<Point> thompson_candidates(const Domain& domain, const PreferenceDataset& ds, int count, Rng& rng) {
  if (!domain.is_box()) return domain.alternatives();
  const int d = domain.dim();
  std::vector<Point> out;
  out.reserve(count + ds.distinct_points().size());
  Eigen::VectorXd shift(d);
  for (int c = 0; c < d; ++c) shift[c] = rng.uniform();
  const std::uint64_t offset = 1 + rng.index(1 << 16);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd u(d);
    for (int c = 0; c < d; ++c) {
      const int base = c < static_cast<int>(kPrimes.size()) ? kPrimes[c] : kPrimes.back();
      u[c] = std::fmod(radical_inverse(offset + static_cast<std::uint64_t>(i), base) + shift[c], 1.0);
    }
    out.push_back(domain.clamp(domain.from_unit(u)));
  }
  for (const auto& x : ds.distinct_points()) out.push_back(x);
  return out;
}

Query thompson_query(const PosteriorModel& model, int q, const std::vector<Point>& candidates, Rng& rng, int features) {
  if (candidates.empty()) throw InvalidArgument("thompson_query: empty candidate set");
  if (q < 1) throw InvalidArgument("thompson_query: q must be >= 1");
  const auto& h = model.hyper();
  const int d = model.dim();
  const Eigen::Index n = static_cast<Eigen::Index>(candidates.size());
  const Eigen::Index m = model.num_anchors();

  Eigen::MatrixXd C(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (candidates[i].size() != d) throw InvalidArgument("thompson_query: candidate dimension mismatch");
    C.row(i) = candidates[i].transpose();
  }
  Eigen::MatrixXd Kc;
  Eigen::MatrixXd Lpost;
  if (m > 0) {
    Kc.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) Kc.row(i) = model.cross_kernel(candidates[i]).transpose();
    Lpost = linalg::psd_cholesky(model.anchor_covariance()).L;
  }

  const double scale = std::sqrt(2.0 * h.outputscale / features);
  Query out;
  for (int path = 0; path < q; ++path) {
    Eigen::MatrixXd W(features, d);
    Eigen::VectorXd b(features), w(features);
    for (int f = 0; f < features; ++f) {
      for (int c = 0; c < d; ++c) W(f, c) = rng.normal() / h.lengthscales[c];
      b[f] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w[f] = rng.normal();
    }
    auto prior_path = [&](const Eigen::MatrixXd& P) -> Eigen::VectorXd {
      Eigen::MatrixXd arg = (P * W.transpose()).rowwise() + b.transpose();
      return scale * (arg.array().cos().matrix() * w);
    };
    Eigen::VectorXd values = prior_path(C).array() + h.mean_const;
    if (m > 0) {
      Eigen::VectorXd z(m);
      for (Eigen::Index j = 0; j < m; ++j) z[j] = rng.normal();
      const Eigen::VectorXd f_anchor = model.mode() + Lpost * z;
      const Eigen::VectorXd resid = f_anchor - prior_path(model.anchors()) - Eigen::VectorXd::Constant(m, h.mean_const);
      values += Kc * model.kernel_cholesky().solve(resid);
    }
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (values[i] > values[best]) best = i;
    out.points.push_back(candidates[best]);
  }
  return out;
}

Query random_query(const Domain& domain, int q, Rng& rng) {
  Query X;
  for (int i = 0; i < q; ++i) X.points.push_back(domain.sample(rng));
  return X;
}

// ---------------------------------------------------------------------------

Query optimize_acquisition(const PosteriorModel& model, const AcquisitionSpec& spec, const Domain& domain,
                           const PreferenceDataset& ds, Rng& rng) {
  spec.validate();
  if (spec.kind != AcquisitionKind::Qeubo && spec.kind != AcquisitionKind::Qei)
    throw InvalidArgument("optimize_acquisition: only qeubo and qei are SAA-optimized");
  const int q = spec.q;
  const BaseSampleSet base = BaseSampleSet::draw(spec.mc_samples, q, rng);
  // qEI needs previously queried points; with none it ranks queries like qEUBO.
  double incumbent = 0.0;
  const bool use_incumbent = spec.kind == AcquisitionKind::Qei && !ds.empty();
  if (use_incumbent) incumbent = incumbent_value(model, ds);
  const double* inc = use_incumbent ? &incumbent : nullptr;
  auto value_of = [&](const Query& X) { return saa_value(model, X, base, inc); };

  if (!domain.is_box()) {
    const auto& alts = domain.alternatives();
    const std::size_t n = alts.size();
    double total = 1.0;
    for (int i = 0; i < q; ++i) total *= static_cast<double>(n);
    Query best;
    double best_value = kNegInf;
    if (total <= 1e5) {
      std::vector<std::size_t> idx(q, 0);
      while (true) {
        Query X;
        for (auto k : idx) X.points.push_back(alts[k]);
        const double v = value_of(X);
        if (v > best_value) {
          best_value = v;
          best = std::move(X);
        }
        int pos = q - 1;
        while (pos >= 0 && ++idx[pos] == n) idx[pos--] = 0;
        if (pos < 0) break;
      }
      return best;
    }
    const int tries = spec.raw_candidates * std::max(spec.restarts, 1);
    for (int t = 0; t < tries; ++t) {
      Query X = random_query(domain, q, rng);
      const double v = value_of(X);
      if (v > best_value) {
        best_value = v;
        best = std::move(X);
      }
    }
    return best;
  }

  // Raw candidates plus the replicated posterior-mean maximizer.
  std::vector<Query> raw;
  raw.reserve(spec.raw_candidates + 1);
  for (int k = 0; k < spec.raw_candidates; ++k) raw.push_back(random_query(domain, q, rng));
  Point mean_best;
  double mean_best_value = kNegInf;
  auto consider = [&](const Point& x) {
    const double v = model.mean_at(x);
    if (v > mean_best_value) {
      mean_best_value = v;
      mean_best = x;
    }
  };
  for (const auto& X : raw)
    for (const auto& x : X.points) consider(x);
  for (const auto& x : ds.distinct_points()) consider(x);
  raw.push_back(Query{std::vector<Point>(q, mean_best)});
  const std::size_t seeded = raw.size() - 1;

  std::vector<double> raw_values(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) raw_values[k] = value_of(raw[k]);
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw_values[a] > raw_values[b]; });
  const std::size_t n_starts = std::min<std::size_t>(spec.restarts, order.size());
  std::vector<std::size_t> starts(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_starts));
  if (std::find(starts.begin(), starts.end(), seeded) == starts.end()) starts.back() = seeded;

  std::size_t best_raw = order.front();
  Query best = raw[best_raw];
  double best_value = raw_values[best_raw];

  const int d = domain.dim();
  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(q * d), hi = Eigen::VectorXd::Ones(q * d);
  optim::AscentOptions opts;
  opts.max_iterations = spec.max_iterations;
  opts.learning_rate = spec.learning_rate;
  auto objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd* g) {
    const Query X = unflatten_unit(domain, u, q);
    if (!g) return value_of(X);
    std::vector<Eigen::VectorXd> gx;
    const double v = saa_value(model, X, base, inc, &gx);
    g->resize(q * d);
    for (int i = 0; i < q; ++i) g->segment(i * d, d) = gx[i].cwiseProduct(domain.width());
    return v;
  };
  for (std::size_t s : starts) {
    if (spec.max_iterations == 0) break;
    const optim::Result r = optim::projected_ascent(objective, flatten_unit(domain, raw[s]), lo, hi, opts);
    if (r.value > best_value) {
      best_value = r.value;
      best = unflatten_unit(domain, r.x, q);
    }
  }
  return best;
}

Query next_query(const PosteriorModel& model, const AcquisitionSpec& spec, const Domain& domain,
                 const PreferenceDataset& ds, Rng& rng) {
  switch (spec.kind) {
    case AcquisitionKind::Random: return random_query(domain, spec.q, rng);
    case AcquisitionKind::Thompson: {
      const auto cands = thompson_candidates(domain, ds, spec.ts_candidates, rng);
      return thompson_query(model, spec.q, cands, rng, spec.rff_features);
    }
    default: return optimize_acquisition(model, spec, domain, ds, rng);
  }
}

}  // namespace pbo
