#include "pbo/preference_model.hpp"

#include "pbo/linalg.hpp"
#include "pbo/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pbo {
namespace {

// Columns of Lw (W = Lw Lwᵀ); each column touches only the q anchors of
// one observation.
struct SparseColumns {
  std::vector<int> start{0};
  std::vector<int> row;
  std::vector<double> value;

  Eigen::Index cols() const { return static_cast<Eigen::Index>(start.size()) - 1; }
  void push(int r, double v) {
    row.push_back(r);
    value.push_back(v);
  }
  void close() { start.push_back(static_cast<int>(row.size())); }
};

// M · Lw for dense M (k × m).
Eigen::MatrixXd dense_times_sparse(const Eigen::MatrixXd& M, const SparseColumns& S) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(M.rows(), S.cols());
  for (Eigen::Index c = 0; c < S.cols(); ++c)
    for (int e = S.start[c]; e < S.start[c + 1]; ++e) out.col(c) += S.value[e] * M.col(S.row[e]);
  return out;
}

// Lwᵀ · v
Eigen::VectorXd sparse_t_times(const SparseColumns& S, const Eigen::VectorXd& v) {
  Eigen::VectorXd out(S.cols());
  for (Eigen::Index c = 0; c < S.cols(); ++c) {
    double s = 0.0;
    for (int e = S.start[c]; e < S.start[c + 1]; ++e) s += S.value[e] * v[S.row[e]];
    out[c] = s;
  }
  return out;
}

// Lw · Y for dense Y (r × k), result m × k.
Eigen::MatrixXd sparse_times_dense(const SparseColumns& S, const Eigen::MatrixXd& Y, Eigen::Index m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, Y.cols());
  for (Eigen::Index c = 0; c < S.cols(); ++c)
    for (int e = S.start[c]; e < S.start[c + 1]; ++e) out.row(S.row[e]) += S.value[e] * Y.row(c);
  return out;
}

struct LikelihoodTerms {
  double log_likelihood = 0.0;
  Eigen::VectorXd gradient;
  SparseColumns hessian_factor;
};

LikelihoodTerms likelihood_terms(const PreferenceDataset& ds, const Eigen::VectorXd& f, double lambda,
                                 bool with_hessian) {
  LikelihoodTerms t;
  t.gradient = Eigen::VectorXd::Zero(f.size());
  for (const auto& obs : ds.observations()) {
    const auto& idx = obs.point_index;
    const int q = static_cast<int>(idx.size());
    Eigen::VectorXd s(q);
    for (int j = 0; j < q; ++j) s[j] = f[idx[j]] / lambda;
    const double smax = s.maxCoeff();
    Eigen::VectorXd p = (s.array() - smax).exp();
    const double z = p.sum();
    p /= z;
    const int c = obs.response.choice;
    t.log_likelihood += s[c] - smax - std::log(z);
    for (int j = 0; j < q; ++j) t.gradient[idx[j]] += ((j == c ? 1.0 : 0.0) - p[j]) / lambda;
    if (!with_hessian) continue;
    if (q == 2) {
      // diag(p) − ppᵀ is rank one for q = 2.
      const double v = std::sqrt(p[0] * p[1]) / lambda;
      t.hessian_factor.push(idx[0], v);
      t.hessian_factor.push(idx[1], -v);
      t.hessian_factor.close();
      continue;
    }
    // diag(p) − ppᵀ = Cᵀ C with C = diag(√p) − √p pᵀ.
    for (int k = 0; k < q; ++k) {
      const double sk = std::sqrt(p[k]);
      for (int j = 0; j < q; ++j) t.hessian_factor.push(idx[j], ((j == k ? sk : 0.0) - sk * p[j]) / lambda);
      t.hessian_factor.close();
    }
  }
  return t;
}

double inf() { return std::numeric_limits<double>::infinity(); }

}  // namespace

// ---------------------------------------------------------------------------

Hyperparameters Hyperparameters::defaults(const Domain& domain) {
  Hyperparameters h;
  h.lengthscales = 0.2 * domain.width();
  return h;
}

json hyperparameters_to_json(const Hyperparameters& h) {
  return {{"lengthscales", point_to_json(h.lengthscales)},
          {"outputscale", h.outputscale},
          {"mean_const", h.mean_const},
          {"noise_level", h.noise_level}};
}

Hyperparameters hyperparameters_from_json(const json& j) {
  Hyperparameters h;
  h.lengthscales = point_from_json(j.at("lengthscales"));
  h.outputscale = j.at("outputscale").get<double>();
  h.mean_const = j.at("mean_const").get<double>();
  h.noise_level = j.at("noise_level").get<double>();
  if ((h.lengthscales.array() <= 0.0).any() || h.outputscale <= 0.0 || h.noise_level < 0.0)
    throw InvalidArgument("hyperparameters: lengthscales and outputscale must be > 0, noise_level >= 0");
  return h;
}

double rbf_kernel(const Point& x, const Point& y, const Hyperparameters& hyper) {
  if (x.size() != y.size() || x.size() != hyper.lengthscales.size())
    throw InvalidArgument("rbf_kernel: dimension mismatch");
  const double r2 = (x - y).cwiseQuotient(hyper.lengthscales).squaredNorm();
  return hyper.outputscale * std::exp(-0.5 * r2);
}

Eigen::VectorXd choice_likelihood(const Eigen::VectorXd& utilities, double noise_level) {
  if (utilities.size() == 0) throw InvalidArgument("choice_likelihood: empty utilities");
  if (!(noise_level >= 0.0)) throw InvalidArgument("choice_likelihood: noise level must be >= 0");
  const double umax = utilities.maxCoeff();
  Eigen::VectorXd p(utilities.size());
  if (noise_level == 0.0) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = utilities[i] == umax ? 1.0 : 0.0;
  } else {
    p = ((utilities.array() - umax) / noise_level).exp();
  }
  return p / p.sum();
}

// ---------------------------------------------------------------------------

void PosteriorModel::check_dim(const Point& x) const {
  if (x.size() != hyper_.lengthscales.size()) {
    std::ostringstream os;
    os << "posterior: point has dimension " << x.size() << ", model expects " << hyper_.lengthscales.size();
    throw InvalidArgument(os.str());
  }
}

Eigen::VectorXd PosteriorModel::cross_kernel(const Point& x) const {
  check_dim(x);
  const Eigen::Index m = anchors_.rows();
  Eigen::VectorXd k(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double r2 = ((anchors_.row(j).transpose() - x).array().square() * inv_sq_lengthscales_.array()).sum();
    k[j] = hyper_.outputscale * std::exp(-0.5 * r2);
  }
  return k;
}

Eigen::MatrixXd PosteriorModel::cross_kernel_jacobian(const Point& x, const Eigen::VectorXd& kx) const {
  const Eigen::Index m = anchors_.rows();
  Eigen::MatrixXd J(m, x.size());
  for (Eigen::Index j = 0; j < m; ++j)
    J.row(j) = (kx[j] * (anchors_.row(j).transpose() - x).cwiseProduct(inv_sq_lengthscales_)).transpose();
  return J;
}

GaussianPosterior PosteriorModel::posterior_at(const std::vector<Point>& points) const {
  const Eigen::Index k = static_cast<Eigen::Index>(points.size());
  for (const auto& x : points) check_dim(x);
  GaussianPosterior out;
  out.mean = Eigen::VectorXd::Constant(k, hyper_.mean_const);
  out.covariance.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.covariance(i, i) = hyper_.outputscale;
    for (Eigen::Index j = 0; j < i; ++j) out.covariance(i, j) = out.covariance(j, i) = rbf_kernel(points[i], points[j], hyper_);
  }
  if (anchors_.rows() == 0) return out;
  Eigen::MatrixXd V(k, anchors_.rows());
  for (Eigen::Index i = 0; i < k; ++i) V.row(i) = cross_kernel(points[i]).transpose();
  out.mean.noalias() += V * alpha_;
  Eigen::MatrixXd VQ = V * reduction_;
  out.covariance.noalias() -= VQ * V.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

double PosteriorModel::mean_at(const Point& x) const { return mean_and_gradient(x, nullptr); }

double PosteriorModel::mean_and_gradient(const Point& x, Eigen::VectorXd* grad) const {
  check_dim(x);
  if (anchors_.rows() == 0) {
    if (grad) *grad = Eigen::VectorXd::Zero(x.size());
    return hyper_.mean_const;
  }
  const Eigen::VectorXd kx = cross_kernel(x);
  if (grad) *grad = cross_kernel_jacobian(x, kx).transpose() * alpha_;
  return hyper_.mean_const + kx.dot(alpha_);
}

Eigen::MatrixXd PosteriorModel::anchor_covariance() const {
  Eigen::MatrixXd S = kernel_ - kernel_ * reduction_ * kernel_;
  return 0.5 * (S + S.transpose());
}

PosteriorModel fit_laplace(const PreferenceDataset& ds, const Hyperparameters& hyper, const LaplaceOptions& options,
                           const Eigen::VectorXd* warm_alpha) {
  if (hyper.lengthscales.size() < 1 || (hyper.lengthscales.array() <= 0.0).any())
    throw InvalidArgument("fit_laplace: lengthscales must be positive");
  if (!(hyper.outputscale > 0.0)) throw InvalidArgument("fit_laplace: outputscale must be positive");
  if (!(hyper.noise_level > 0.0)) throw InvalidArgument("fit_laplace: noise level must be > 0");

  PosteriorModel model;
  model.hyper_ = hyper;
  model.dataset_ = ds;
  model.inv_sq_lengthscales_ = hyper.lengthscales.array().square().inverse();

  const auto& pts = ds.distinct_points();
  const Eigen::Index m = static_cast<Eigen::Index>(pts.size());
  const Eigen::Index d = hyper.lengthscales.size();
  model.anchors_.resize(m, d);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (pts[j].size() != d) throw InvalidArgument("fit_laplace: dataset dimension does not match lengthscales");
    model.anchors_.row(j) = pts[j].transpose();
  }
  if (m == 0) {
    model.alpha_.resize(0);
    model.mode_.resize(0);
    model.reduction_.resize(0, 0);
    model.kernel_.resize(0, 0);
    return model;
  }

  model.kernel_.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    model.kernel_(i, i) = hyper.outputscale;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = ((model.anchors_.row(i) - model.anchors_.row(j)).array().square() *
                         model.inv_sq_lengthscales_.transpose().array())
                            .sum();
      model.kernel_(i, j) = model.kernel_(j, i) = hyper.outputscale * std::exp(-0.5 * r2);
    }
  }
  auto chol = linalg::jittered_cholesky(model.kernel_);
  model.kernel_llt_ = std::move(chol.llt);
  model.jitter_ = chol.jitter;
  Eigen::MatrixXd Kj = model.kernel_;
  Kj.diagonal().array() += model.jitter_;

  const double lambda = hyper.noise_level;
  const double c = hyper.mean_const;
  Eigen::VectorXd a = (warm_alpha && warm_alpha->size() == m) ? *warm_alpha : Eigen::VectorXd::Zero(m);

  auto objective = [&](const Eigen::VectorXd& alpha, Eigen::VectorXd& f) {
    f = Eigen::VectorXd::Constant(m, c) + Kj * alpha;
    return likelihood_terms(ds, f, lambda, false).log_likelihood - 0.5 * alpha.dot(Kj * alpha);
  };

  Eigen::VectorXd f;
  double psi = objective(a, f);
  if (!std::isfinite(psi)) {
    a.setZero();
    psi = objective(a, f);
  }
  bool converged = false;
  double grad_norm = inf();
  int it = 0;
  for (; it <= options.max_iterations; ++it) {
    LikelihoodTerms lt = likelihood_terms(ds, f, lambda, true);
    grad_norm = (lt.gradient - a).cwiseAbs().maxCoeff();
    if (grad_norm <= options.gradient_tolerance) {
      converged = true;
      break;
    }
    if (it == options.max_iterations) break;

    const SparseColumns& Lw = lt.hessian_factor;
    const Eigen::Index r = Lw.cols();
    Eigen::MatrixXd KLw = dense_times_sparse(Kj, Lw);  // m × r
    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(r, r);
    for (Eigen::Index col = 0; col < r; ++col)
      for (int e = Lw.start[col]; e < Lw.start[col + 1]; ++e) B.row(col) += Lw.value[e] * KLw.row(Lw.row[e]);
    B = 0.5 * (B + B.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) throw NumericalError("fit_laplace: B factorization failed");

    // b = W (f − c) + g;  a_new = b − Lw B⁻¹ Lwᵀ K b
    Eigen::VectorXd fc = f.array() - c;
    Eigen::VectorXd b = sparse_times_dense(Lw, sparse_t_times(Lw, fc), m) + lt.gradient;
    Eigen::VectorXd tmp = llt.solve(sparse_t_times(Lw, Kj * b));
    Eigen::VectorXd a_new = b - sparse_times_dense(Lw, tmp, m);
    Eigen::VectorXd da = a_new - a;

    double t = 1.0;
    Eigen::VectorXd a_try, f_try;
    double psi_try = -inf();
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      a_try = a + t * da;
      psi_try = objective(a_try, f_try);
      if (psi_try >= psi) break;
    }
    if (!(psi_try >= psi) && !std::isfinite(psi_try)) throw NumericalError("fit_laplace: objective became non-finite");
    a = std::move(a_try);
    f = std::move(f_try);
    psi = psi_try;
  }
  if (!converged) {
    std::ostringstream os;
    os << "fit_laplace: Newton did not converge after " << options.max_iterations
       << " iterations (gradient inf-norm " << grad_norm << ")";
    throw NumericalError(os.str());
  }
  model.newton_iterations_ = it;

  LikelihoodTerms lt = likelihood_terms(ds, f, lambda, true);
  const SparseColumns& Lw = lt.hessian_factor;
  const Eigen::Index r = Lw.cols();
  Eigen::MatrixXd KLw = dense_times_sparse(Kj, Lw);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(r, r);
  for (Eigen::Index col = 0; col < r; ++col)
    for (int e = Lw.start[col]; e < Lw.start[col + 1]; ++e) B.row(col) += Lw.value[e] * KLw.row(Lw.row[e]);
  B = 0.5 * (B + B.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) throw NumericalError("fit_laplace: B factorization failed");

  Eigen::MatrixXd LwT = Eigen::MatrixXd::Zero(r, m);
  for (Eigen::Index col = 0; col < r; ++col)
    for (int e = Lw.start[col]; e < Lw.start[col + 1]; ++e) LwT(col, Lw.row[e]) += Lw.value[e];
  Eigen::MatrixXd Q = sparse_times_dense(Lw, llt.solve(LwT), m);
  model.reduction_ = 0.5 * (Q + Q.transpose());

  double log_det_b = 0.0;
  const Eigen::MatrixXd& LB = llt.matrixLLT();
  for (Eigen::Index i = 0; i < r; ++i) log_det_b += 2.0 * std::log(LB(i, i));

  model.alpha_ = a;
  model.mode_ = Eigen::VectorXd::Constant(m, c) + model.kernel_ * a;
  model.log_marginal_ = psi - 0.5 * log_det_b;
  return model;
}

GaussianPosterior posterior_at(const PosteriorModel& model, const std::vector<Point>& points) {
  return model.posterior_at(points);
}

// ---------------------------------------------------------------------------

HyperparameterBounds HyperparameterBounds::defaults(const Domain& domain) {
  HyperparameterBounds b;
  b.lengthscale_lower = 0.01 * domain.width();
  b.lengthscale_upper = 10.0 * domain.width();
  return b;
}

HyperFitConfig HyperFitConfig::defaults(const Domain& domain) {
  HyperFitConfig c;
  c.bounds = HyperparameterBounds::defaults(domain);
  c.init = Hyperparameters::defaults(domain);
  c.lengthscale_unit = domain.width();
  return c;
}

namespace {

double outputscale_log_prior(double outputscale, double sd) {
  if (sd <= 0.0) return 0.0;
  const double z = std::log(outputscale) / sd;
  return -0.5 * z * z;
}

double lengthscale_log_prior(const Eigen::VectorXd& lengthscales, const HyperFitConfig& c) {
  if (c.lengthscale_unit.size() == 0 || c.lengthscale_prior_shape <= 0.0) return 0.0;
  if (c.lengthscale_unit.size() != lengthscales.size())
    throw InvalidArgument("HyperFitConfig: lengthscale_unit dimension does not match");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < lengthscales.size(); ++i) {
    const double u = lengthscales[i] / c.lengthscale_unit[i];
    lp += (c.lengthscale_prior_shape - 1.0) * std::log(u) - c.lengthscale_prior_rate * u;
  }
  return lp;
}

double log_prior(const Hyperparameters& h, const HyperFitConfig& c) {
  return outputscale_log_prior(h.outputscale, c.log_outputscale_prior_sd) + lengthscale_log_prior(h.lengthscales, c);
}

// θ = (log ℓ₁..ℓ_d, log σ², log λ)
Eigen::VectorXd to_theta(const Hyperparameters& h) {
  const Eigen::Index d = h.lengthscales.size();
  Eigen::VectorXd t(d + 2);
  t.head(d) = h.lengthscales.array().log();
  t[d] = std::log(h.outputscale);
  t[d + 1] = std::log(h.noise_level);
  return t;
}

Hyperparameters from_theta(const Eigen::VectorXd& t, double mean_const) {
  const Eigen::Index d = t.size() - 2;
  Hyperparameters h;
  h.lengthscales = t.head(d).array().exp();
  h.outputscale = std::exp(t[d]);
  h.noise_level = std::exp(t[d + 1]);
  h.mean_const = mean_const;
  return h;
}

}  // namespace

double hyperparameter_objective(const PreferenceDataset& ds, const Hyperparameters& hyper,
                                const HyperFitConfig& config) {
  try {
    const PosteriorModel m = fit_laplace(ds, hyper);
    return m.log_marginal_likelihood() + log_prior(hyper, config);
  } catch (const NumericalError&) {
    return -inf();
  }
}

Hyperparameters fit_hyperparameters(const PreferenceDataset& ds, const HyperFitConfig& config) {
  if (ds.empty()) throw InvalidArgument("fit_hyperparameters: dataset is empty");
  const auto& b = config.bounds;
  const Eigen::Index d = b.lengthscale_lower.size();
  if (d != ds.dim()) throw InvalidArgument("fit_hyperparameters: bounds dimension does not match dataset");

  Eigen::VectorXd lo(d + 2), hi(d + 2);
  lo.head(d) = b.lengthscale_lower.array().log();
  hi.head(d) = b.lengthscale_upper.array().log();
  lo[d] = std::log(b.outputscale_lower);
  hi[d] = std::log(b.outputscale_upper);
  lo[d + 1] = std::log(b.noise_lower);
  hi[d + 1] = std::log(b.noise_upper);

  Hyperparameters init;
  if (config.init) {
    init = *config.init;
  } else {
    init.lengthscales = (0.5 * (lo.head(d) + hi.head(d))).array().exp();
  }
  const double mean_const = init.mean_const;
  const Eigen::VectorXd theta0 = to_theta(init).cwiseMax(lo).cwiseMin(hi);

  Rng rng(derive_seed(config.seed, {stream_tag("hyper-restarts")}));
  std::vector<Eigen::VectorXd> starts{theta0};
  for (int r = 1; r < std::max(config.restarts, 1); ++r) {
    Eigen::VectorXd t(d + 2);
    for (Eigen::Index i = 0; i < d + 2; ++i) t[i] = rng.uniform(lo[i], hi[i]);
    starts.push_back(t);
  }

  optim::NelderMeadOptions nm;
  nm.max_evaluations = config.max_evaluations;
  nm.initial_step = 0.1;
  nm.value_tolerance = 1e-6;

  double best_value = -inf();
  Eigen::VectorXd best_theta;
  for (const auto& start : starts) {
    Eigen::VectorXd warm;
    auto objective = [&](const Eigen::VectorXd& t) {
      const Hyperparameters h = from_theta(t, mean_const);
      try {
        const PosteriorModel m = fit_laplace(ds, h, {}, warm.size() ? &warm : nullptr);
        warm = m.alpha();
        return m.log_marginal_likelihood() + log_prior(h, config);
      } catch (const NumericalError&) {
        return -inf();
      }
    };
    const optim::Result res = optim::nelder_mead_maximize(objective, start, lo, hi, nm);
    if (res.value > best_value) {
      best_value = res.value;
      best_theta = res.x;
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("fit_hyperparameters: all restarts failed");
  return from_theta(best_theta, mean_const);
}

}  // namespace pbo
