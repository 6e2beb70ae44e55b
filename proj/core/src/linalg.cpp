#include "pbo/linalg.hpp"

#include "pbo/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace pbo::linalg {

double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

PsdFactor psd_cholesky(const Eigen::MatrixXd& S, double rel_tol) {
  const Eigen::Index n = S.rows();
  PsdFactor out;
  out.L = Eigen::MatrixXd::Zero(n, n);
  const double tol = rel_tol * std::max(S.diagonal().maxCoeff(), 0.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = S(j, j) - out.L.row(j).head(j).squaredNorm();
    if (!(d > tol)) {
      out.full_rank = false;
      continue;
    }
    const double ljj = std::sqrt(d);
    out.L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i)
      out.L(i, j) = (S(i, j) - out.L.row(i).head(j).dot(out.L.row(j).head(j))) / ljj;
  }
  return out;
}

JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& K, double start, double max) {
  const double scale = K.rows() > 0 ? std::max(K.diagonal().mean(), 1e-300) : 1.0;
  for (double j = start; j <= max * (1.0 + 1e-9); j *= 10.0) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += j * scale;
    JitteredCholesky out;
    out.llt.compute(A);
    if (out.llt.info() == Eigen::Success) {
      out.jitter = j * scale;
      return out;
    }
  }
  throw NumericalError("cholesky: matrix not positive definite even after jitter escalation");
}

Eigen::MatrixXd cholesky_backprop(const Eigen::MatrixXd& L, const Eigen::MatrixXd& L_bar) {
  Eigen::MatrixXd P = (L.transpose() * L_bar.triangularView<Eigen::Lower>()).triangularView<Eigen::Lower>();
  P.diagonal() *= 0.5;
  const auto Lt = L.triangularView<Eigen::Lower>();
  // S = L⁻ᵀ P L⁻¹
  Eigen::MatrixXd S = Lt.transpose().solve(P);
  S = Lt.transpose().solve(S.transpose()).transpose();
  return 0.5 * (S + S.transpose());
}

double min_eigenvalue(const Eigen::MatrixXd& S) {
  if (S.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace pbo::linalg
