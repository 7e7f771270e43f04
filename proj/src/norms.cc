#include "sdcert/norms.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "sdcert/errors.h"

namespace sdcert {

namespace {

constexpr int kPowerIterMax = 10000;
constexpr double kPowerIterTol = 1e-12;

void require_finite(const Eigen::MatrixXd& M, const char* name) {
  if (!M.allFinite()) {
    throw std::invalid_argument(std::string(name) + " contains non-finite entries");
  }
}

void require_square(const Eigen::MatrixXd& M, const char* name) {
  if (M.rows() != M.cols() || M.rows() == 0) {
    throw std::invalid_argument(std::string(name) + " must be square and non-empty");
  }
}

// Parlett-Reinsch diagonal balancing with radix 2 scaling factors. Returns
// D^{-1} M D, which has the same eigenvalues as M.
Eigen::MatrixXd balance(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd B = M;
  const Eigen::Index n = B.rows();
  constexpr double kRadix = 2.0;
  bool converged = false;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = 0.0;
      double r = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(B(j, i));
        r += std::abs(B(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      double g = r / kRadix;
      while (c < g) {
        f *= kRadix;
        c *= kRadix * kRadix;
      }
      g = r * kRadix;
      while (c >= g) {
        f /= kRadix;
        c /= kRadix * kRadix;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        B.row(i) /= f;
        B.col(i) *= f;
      }
    }
  }
  return B;
}

Eigen::Vector2d perron_vector(const Eigen::Matrix2d& M, bool* ok) {
  Eigen::Vector2d v(1.0, 1.0);
  v.normalize();
  for (int k = 0; k < kPowerIterMax; ++k) {
    Eigen::Vector2d w = M * v;
    const double nw = w.norm();
    if (!(nw > 0.0) || !std::isfinite(nw)) break;
    w /= nw;
    if ((w - v).lpNorm<Eigen::Infinity>() <= kPowerIterTol) {
      *ok = true;
      return w;
    }
    v = w;
  }
  *ok = false;
  return v;
}

double weighted_norm_ratio(const Eigen::Matrix2d& M, double log_ratio) {
  return induced_norm_2_weighted(M, Eigen::Vector2d(1.0, std::exp(log_ratio)));
}

Eigen::Vector2d golden_section_weights(const Eigen::Matrix2d& M) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(1e-6);
  double b = std::log(1e6);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = weighted_norm_ratio(M, c);
  double fd = weighted_norm_ratio(M, d);
  for (int k = 0; k < 200 && (b - a) > 1e-12; ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = weighted_norm_ratio(M, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = weighted_norm_ratio(M, d);
    }
  }
  return Eigen::Vector2d(1.0, std::exp(0.5 * (a + b)));
}

Eigen::MatrixXd l2_factor(const VectorNorm& norm) {
  if (const auto* w = std::get_if<WeightedNorm>(&norm)) {
    if (w->kind() != NormKind::kL2) {
      throw std::invalid_argument("mixed l2 and non-l2 norms are not supported");
    }
    return w->weights().cwiseSqrt().asDiagonal();
  }
  return std::get<QuadraticNorm>(norm).factor();
}

bool is_l2_like(const VectorNorm& norm) {
  if (const auto* w = std::get_if<WeightedNorm>(&norm)) return w->kind() == NormKind::kL2;
  return true;
}

double max_abs_column_sum(const Eigen::MatrixXd& M) {
  return M.cwiseAbs().colwise().sum().maxCoeff();
}

double max_abs_row_sum(const Eigen::MatrixXd& M) {
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace

WeightedNorm::WeightedNorm(NormKind kind, Eigen::VectorXd weights)
    : kind_(kind), weights_(std::move(weights)) {
  if (weights_.size() == 0) throw std::invalid_argument("norm weights must be non-empty");
  if (!weights_.allFinite() || (weights_.array() <= 0.0).any()) {
    throw std::invalid_argument("norm weights must be finite and strictly positive");
  }
}

WeightedNorm WeightedNorm::Unweighted(NormKind kind, int dim) {
  return WeightedNorm(kind, Eigen::VectorXd::Ones(dim));
}

double WeightedNorm::operator()(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != weights_.size()) throw std::invalid_argument("norm dimension mismatch");
  switch (kind_) {
    case NormKind::kL1:
      return weights_.dot(v.cwiseAbs());
    case NormKind::kL2:
      return std::sqrt(weights_.dot(v.cwiseAbs2()));
    case NormKind::kLinf:
      return weights_.cwiseProduct(v.cwiseAbs()).maxCoeff();
  }
  return 0.0;
}

QuadraticNorm::QuadraticNorm(Eigen::MatrixXd P) : P_(std::move(P)) {
  check_spd(P_, "norm weight");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (P_ + P_.transpose()));
  R_ = llt.matrixU();
}

double QuadraticNorm::operator()(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != P_.rows()) throw std::invalid_argument("norm dimension mismatch");
  return (R_ * v).norm();
}

double norm_of(const VectorNorm& norm, const Eigen::Ref<const Eigen::VectorXd>& v) {
  return std::visit([&](const auto& n) { return n(v); }, norm);
}

int norm_dim(const VectorNorm& norm) {
  return std::visit([](const auto& n) { return n.dim(); }, norm);
}

double induced_norm(const Eigen::MatrixXd& M, const VectorNorm& from, const VectorNorm& to) {
  require_finite(M, "matrix");
  if (M.cols() != norm_dim(from) || M.rows() != norm_dim(to)) {
    throw std::invalid_argument("induced_norm: dimension mismatch");
  }
  if (is_l2_like(from) && is_l2_like(to)) {
    const Eigen::MatrixXd Rf = l2_factor(from);
    const Eigen::MatrixXd Rt = l2_factor(to);
    const Eigen::MatrixXd S = Rt * M * Rf.triangularView<Eigen::Upper>().solve(
                                          Eigen::MatrixXd::Identity(M.cols(), M.cols()));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S);
    return svd.singularValues()(0);
  }
  const auto* wf = std::get_if<WeightedNorm>(&from);
  const auto* wt = std::get_if<WeightedNorm>(&to);
  if (wf == nullptr || wt == nullptr || wf->kind() != wt->kind()) {
    throw std::invalid_argument("induced_norm: unsupported norm pair");
  }
  const Eigen::MatrixXd S =
      wt->weights().asDiagonal() * M * wf->weights().cwiseInverse().asDiagonal();
  return wf->kind() == NormKind::kL1 ? max_abs_column_sum(S) : max_abs_row_sum(S);
}

double log_norm(const Eigen::MatrixXd& A, const VectorNorm& norm) {
  require_square(A, "A");
  require_finite(A, "A");
  if (A.rows() != norm_dim(norm)) throw std::invalid_argument("log_norm: dimension mismatch");
  if (is_l2_like(norm)) {
    const Eigen::MatrixXd R = l2_factor(norm);
    const Eigen::MatrixXd S =
        R * A * R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(A.rows(), A.rows()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()),
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }
  const auto& w = std::get<WeightedNorm>(norm);
  const Eigen::MatrixXd S = w.weights().asDiagonal() * A * w.weights().cwiseInverse().asDiagonal();
  Eigen::MatrixXd off = S.cwiseAbs();
  off.diagonal() = S.diagonal();
  return w.kind() == NormKind::kL1 ? off.colwise().sum().maxCoeff()
                                   : off.rowwise().sum().maxCoeff();
}

double h_kernel(double t, double c) {
  if (t < 0.0 || !std::isfinite(t)) throw std::invalid_argument("h_kernel: t must be finite and >= 0");
  if (!std::isfinite(c)) throw std::invalid_argument("h_kernel: c must be finite");
  if (std::abs(c) < 1e-12) return t;
  return std::expm1(c * t) / c;
}

double log_norm_2_weighted(const Eigen::MatrixXd& A, const Eigen::MatrixXd& P) {
  require_square(A, "A");
  if (P.rows() != A.rows()) throw std::invalid_argument("log_norm_2_weighted: dimension mismatch");
  return log_norm(A, QuadraticNorm(P));
}

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& M) {
  require_square(M, "M");
  require_finite(M, "M");
  if (M.rows() == 1) {
    Eigen::VectorXcd ev(1);
    ev(0) = M(0, 0);
    return ev;
  }
  if (M.rows() == 2) {
    const double a = M(0, 0), b = M(0, 1), c = M(1, 0), d = M(1, 1);
    const double tr = a + d;
    const double det = a * d - b * c;
    const double disc = (a - d) * (a - d) + 4.0 * b * c;
    Eigen::VectorXcd ev(2);
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      const double l1 = 0.5 * (tr + std::copysign(s, tr));
      const double l2 = l1 != 0.0 ? det / l1 : 0.5 * (tr - std::copysign(s, tr));
      ev(0) = l1;
      ev(1) = l2;
    } else {
      const double im = 0.5 * std::sqrt(-disc);
      ev(0) = std::complex<double>(0.5 * tr, im);
      ev(1) = std::complex<double>(0.5 * tr, -im);
    }
    return ev;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(balance(M), false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  return es.eigenvalues();
}

double spectral_radius(const Eigen::MatrixXd& M) {
  return eigenvalues(M).cwiseAbs().maxCoeff();
}

double spectral_abscissa(const Eigen::MatrixXd& M) {
  return eigenvalues(M).real().maxCoeff();
}

bool schur_2x2_nonneg(const Eigen::Matrix2d& M) {
  if (!M.allFinite() || (M.array() < 0.0).any()) {
    throw std::invalid_argument("schur_2x2_nonneg: matrix must be finite and entrywise nonnegative");
  }
  return (1.0 - M(0, 0)) * (1.0 - M(1, 1)) > M(0, 1) * M(1, 0) && M(0, 0) + M(1, 1) < 2.0;
}

double induced_norm_2_weighted(const Eigen::MatrixXd& M, const Eigen::VectorXd& eta) {
  require_square(M, "M");
  if (eta.size() != M.rows()) throw std::invalid_argument("induced_norm_2_weighted: dimension mismatch");
  const WeightedNorm w(NormKind::kL2, eta);
  return induced_norm(M, w, w);
}

Eigen::Vector2d perron_weights(const Eigen::Matrix2d& M) {
  if (!M.allFinite() || (M.array() < 0.0).any()) {
    throw std::invalid_argument("perron_weights: matrix must be finite and entrywise nonnegative");
  }
  if (M.isZero(0.0)) return Eigen::Vector2d(1.0, 1.0);
  const double rho = spectral_radius(M);
  if ((M.array() > 0.0).all()) {
    bool ok_right = false;
    bool ok_left = false;
    const Eigen::Vector2d v = perron_vector(M, &ok_right);
    const Eigen::Vector2d u = perron_vector(M.transpose(), &ok_left);
    if (ok_right && ok_left && (v.array() > 0.0).all() && (u.array() > 0.0).all()) {
      Eigen::Vector2d eta = u.cwiseQuotient(v);
      eta /= eta(0);
      if (induced_norm_2_weighted(M, eta) <= rho * (1.0 + 1e-8) + 1e-14) return eta;
    }
  }
  const Eigen::Vector2d eta = golden_section_weights(M);
  const double achieved = induced_norm_2_weighted(M, eta);
  if (!std::isfinite(achieved) || achieved > rho * (1.0 + 1e-4) + 1e-12) {
    throw NumericalError("perron_weights: weight search did not reach the spectral radius");
  }
  return eta;
}

void check_spd(const Eigen::MatrixXd& P, const char* name) {
  require_square(P, name);
  require_finite(P, name);
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if (!P.isApprox(P.transpose(), 1e-10) && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (P + P.transpose()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument(std::string(name) + " must be positive definite");
  }
}

}  // namespace sdcert
