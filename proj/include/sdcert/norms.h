#pragma once

#include <variant>

#include <Eigen/Dense>

namespace sdcert {

enum class NormKind { kL1, kL2, kLinf };

/// Diagonally weighted vector norm.
///
///   p = 1:   sum_i w_i |v_i|
///   p = 2:   sqrt(sum_i w_i v_i^2)
///   p = inf: max_i w_i |v_i|
///
/// All weights must be strictly positive.
class WeightedNorm {
 public:
  WeightedNorm(NormKind kind, Eigen::VectorXd weights);

  static WeightedNorm Unweighted(NormKind kind, int dim);

  NormKind kind() const { return kind_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int dim() const { return static_cast<int>(weights_.size()); }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& v) const;

 private:
  NormKind kind_;
  Eigen::VectorXd weights_;
};

/// sqrt(v' P v) for symmetric positive definite P.
class QuadraticNorm {
 public:
  explicit QuadraticNorm(Eigen::MatrixXd P);

  const Eigen::MatrixXd& weight() const { return P_; }
  // Upper Cholesky factor R with P = R' R, so that the norm is |R v|_2.
  const Eigen::MatrixXd& factor() const { return R_; }
  int dim() const { return static_cast<int>(P_.rows()); }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& v) const;

 private:
  Eigen::MatrixXd P_;
  Eigen::MatrixXd R_;
};

using VectorNorm = std::variant<WeightedNorm, QuadraticNorm>;

double norm_of(const VectorNorm& norm, const Eigen::Ref<const Eigen::VectorXd>& v);
int norm_dim(const VectorNorm& norm);

/// Operator norm of M viewed as a map from (R^cols, from) to (R^rows, to).
/// Supported pairs: both l1, both linf, or any combination of weighted-l2
/// and quadratic norms.
double induced_norm(const Eigen::MatrixXd& M, const VectorNorm& from, const VectorNorm& to);

/// Logarithmic norm of a square matrix with respect to the given norm.
double log_norm(const Eigen::MatrixXd& A, const VectorNorm& norm);

/// (e^{ct} - 1) / c, continued by t at c = 0.
double h_kernel(double t, double c);

/// 0.5 * lambda_max(P A P^{-1} + A') for SPD P. Equals the logarithmic norm
/// of A under the norm sqrt(x' P x).
double log_norm_2_weighted(const Eigen::MatrixXd& A, const Eigen::MatrixXd& P);

/// Eigenvalues of a square matrix. Closed form for 2x2, balanced QR otherwise.
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& M);
double spectral_radius(const Eigen::MatrixXd& M);
double spectral_abscissa(const Eigen::MatrixXd& M);

/// Exact Schur test for an entrywise nonnegative 2x2 matrix:
/// rho(M) < 1 iff (1 - m11)(1 - m22) > m12 m21 and m11 + m22 < 2.
bool schur_2x2_nonneg(const Eigen::Matrix2d& M);

/// Induced norm for the weighted l2 norm with diagonal weights eta:
/// sigma_max(D^{1/2} M D^{-1/2}), D = diag(eta).
double induced_norm_2_weighted(const Eigen::MatrixXd& M, const Eigen::VectorXd& eta);

/// Weights eta for which the weighted-l2 induced norm of an entrywise
/// positive 2x2 matrix equals its spectral radius. Normalized to eta(0) = 1.
Eigen::Vector2d perron_weights(const Eigen::Matrix2d& M);

/// Throws std::invalid_argument unless P is square, symmetric and positive
/// definite.
void check_spd(const Eigen::MatrixXd& P, const char* name);

}  // namespace sdcert
