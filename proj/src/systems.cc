#include "sdcert/systems.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "sdcert/errors.h"

namespace sdcert {

void CtDtSystem::validate() const {
  if (!f || !G) throw std::invalid_argument("CtDtSystem: f and G must be set");
  if (nx <= 0 || nz <= 0) throw std::invalid_argument("CtDtSystem: dimensions must be positive");
  if (n < 1) throw std::invalid_argument("CtDtSystem: n must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("CtDtSystem: T must be positive");
}

Eigen::VectorXd CtDtSystem::eval_f(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  Eigen::VectorXd dx = f(x, z);
  if (dx.size() != nx) throw std::invalid_argument("f returned a vector of the wrong size");
  return dx;
}

Eigen::VectorXd CtDtSystem::eval_G(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  Eigen::VectorXd zn = G(x, z);
  if (zn.size() != nz) throw std::invalid_argument("G returned a vector of the wrong size");
  return zn;
}

void LtiSystem::validate() const {
  const auto n = A.rows();
  const auto m = D.rows();
  if (A.cols() != n || n == 0) throw std::invalid_argument("A must be square and non-empty");
  if (D.cols() != m || m == 0) throw std::invalid_argument("D must be square and non-empty");
  if (B.rows() != n || B.cols() != m) throw std::invalid_argument("B must be nx-by-nz");
  if (C.rows() != m || C.cols() != n) throw std::invalid_argument("C must be nz-by-nx");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite()) {
    throw std::invalid_argument("LTI matrices must be finite");
  }
}

Eigen::MatrixXd LtiSystem::reduced_matrix() const {
  validate();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nz(), nz());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(I - D);
  if (!lu.isInvertible()) throw std::invalid_argument("I - D is singular");
  return A + B * lu.solve(C);
}

Eigen::VectorXd compose_G(const CtDtSystem& sys, const Eigen::VectorXd& x, Eigen::VectorXd z, int n) {
  if (n < 0) throw std::invalid_argument("compose_G: n must be >= 0");
  for (int i = 0; i < n; ++i) z = sys.eval_G(x, z);
  return z;
}

FixedPointResult fixed_point_zstar(const CtDtSystem& sys, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& z0, double tol, int max_iter) {
  if (z0.size() != sys.nz) throw std::invalid_argument("fixed_point_zstar: z0 has the wrong size");
  FixedPointResult out;
  Eigen::VectorXd z = z0;
  for (int k = 0; k <= max_iter; ++k) {
    Eigen::VectorXd g = sys.eval_G(x, z);
    const double r = (g - z).norm();
    if (!std::isfinite(r)) throw NumericalError("fixed_point_zstar: iteration produced non-finite values");
    out.z_star = z;
    out.iterations = k;
    out.residual = r;
    if (r <= tol) {
      out.converged = true;
      return out;
    }
    z = std::move(g);
  }
  return out;
}

VectorField reduced_model(const CtDtSystem& sys, double tol, int max_iter) {
  sys.validate();
  return [sys, tol, max_iter](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    const FixedPointResult fp = fixed_point_zstar(sys, x, Eigen::VectorXd::Zero(sys.nz), tol, max_iter);
    if (!fp.converged) {
      throw NumericalError("reduced_model: fixed point iteration did not converge (residual " +
                           std::to_string(fp.residual) + ")");
    }
    return sys.eval_f(x, fp.z_star);
  };
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("expm: matrix must be square");
  if (!M.allFinite()) throw std::invalid_argument("expm: matrix must be finite");
  Eigen::MatrixXd E = M.exp();
  if (!E.allFinite()) throw NumericalError("expm: result is not finite");
  return E;
}

ZohPair zoh_discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw std::invalid_argument("zoh_discretize: dimension mismatch");
  }
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw std::invalid_argument("zoh_discretize: dt must be >= 0");
  const auto n = A.rows();
  const auto m = B.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A * dt;
  aug.topRightCorner(n, m) = B * dt;
  const Eigen::MatrixXd E = expm(aug);
  return {E.topLeftCorner(n, n), E.topRightCorner(n, m)};
}

CtDtSystem make_lti_ctdt(const LtiSystem& lti, int n, double T) {
  lti.validate();
  CtDtSystem sys;
  const Eigen::MatrixXd A = lti.A, B = lti.B, C = lti.C, D = lti.D;
  sys.f = [A, B](const Eigen::VectorXd& x, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return A * x + B * z;
  };
  sys.G = [C, D](const Eigen::VectorXd& x, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return C * x + D * z;
  };
  sys.nx = lti.nx();
  sys.nz = lti.nz();
  sys.n = n;
  sys.T = T;
  sys.validate();
  return sys;
}

}  // namespace sdcert
