#pragma once

// Small dense linear-algebra helpers shared by the model and acquisitions.

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace pbo::linalg {

double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;

/// Lower-triangular L with L Lᵀ ≈ S for symmetric PSD S. Pivots below
/// rel_tol · max diag(S) are treated as zero and their column is dropped,
/// so exactly repeated rows of S give exactly repeated rows of L.
struct PsdFactor {
  Eigen::MatrixXd L;
  bool full_rank = true;
};
PsdFactor psd_cholesky(const Eigen::MatrixXd& S, double rel_tol = 1e-12);

/// Cholesky of K + jitter·scale·I, escalating jitter ×10 from `start` to
/// `max` on failure; scale is the mean diagonal. Throws NumericalError.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // absolute amount added to the diagonal
};
JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& K, double start = 1e-10, double max = 1e-6);

/// Reverse-mode derivative through S = L Lᵀ: given ∂v/∂L (lower triangle
/// used), returns the symmetric ∂v/∂S.
Eigen::MatrixXd cholesky_backprop(const Eigen::MatrixXd& L, const Eigen::MatrixXd& L_bar);

double min_eigenvalue(const Eigen::MatrixXd& S);

}  // namespace pbo::linalg
