#pragma once

#include <functional>

#include <Eigen/Dense>

namespace sdcert {

/// Right-hand side x' = f(x, z) of the continuous plant, or the update map
/// z+ = G(x, z) of the discrete controller.
using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
using DiscreteMap = VectorField;

/// Continuous plant in feedback with a discrete controller that runs n
/// iterations of G every T seconds and holds its output in between.
struct CtDtSystem {
  VectorField f;
  DiscreteMap G;
  int nx = 0;
  int nz = 0;
  int n = 1;
  double T = 0.0;

  void validate() const;
  Eigen::VectorXd eval_f(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::VectorXd eval_G(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
};

/// x' = A x + B z,  z+ = C x + D z.
struct LtiSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  int nx() const { return static_cast<int>(A.rows()); }
  int nz() const { return static_cast<int>(D.rows()); }
  void validate() const;
  /// A + B (I - D)^{-1} C, the plant with the controller at its fixed point.
  Eigen::MatrixXd reduced_matrix() const;
};

struct FixedPointResult {
  Eigen::VectorXd z_star;
  int iterations = 0;
  double residual = 0.0;  // |G(x, z) - z|_2 at the returned z
  bool converged = false;
};

/// n-fold iterate of G(x, .) starting from z.
Eigen::VectorXd compose_G(const CtDtSystem& sys, const Eigen::VectorXd& x, Eigen::VectorXd z, int n);

/// Picard iteration z <- G(x, z) until the residual drops to tol.
FixedPointResult fixed_point_zstar(const CtDtSystem& sys, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& z0, double tol = 1e-12,
                                   int max_iter = 100000);

/// x' = f(x, z*(x)). Evaluation throws NumericalError if the fixed point
/// iteration does not converge.
VectorField reduced_model(const CtDtSystem& sys, double tol = 1e-12, int max_iter = 100000);

/// Matrix exponential (scaling and squaring with a degree 13 Pade approximant).
Eigen::MatrixXd expm(const Eigen::MatrixXd& M);

struct ZohPair {
  Eigen::MatrixXd Ad;  // e^{A dt}
  Eigen::MatrixXd Bd;  // int_0^dt e^{A s} ds B
};

/// Exact zero-order-hold discretization through the exponential of the
/// augmented matrix [[A, B], [0, 0]] dt.
ZohPair zoh_discretize(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt);

CtDtSystem make_lti_ctdt(const LtiSystem& sys, int n, double T);

}  // namespace sdcert
