#pragma once

#include <memory>

#include <Eigen/Dense>

#include "sdcert/systems.h"

namespace sdcert {

/// Discrete-time linear MPC with horizon H over x_{i+1} = Ad x_i + Bd u_i.
/// Decision vector z = (u_1, ..., u_H); x_1 is the measured state. Stage
/// costs weigh x_2..x_H with Q and u_i with R, the terminal state x_{H+1}
/// with P. With gamma > 0 the quadratic penalty
///   gamma * sum_{i=2}^{H+1} |max(0, lower - x_i)|^2 + |max(0, x_i - upper)|^2
/// softens the state box.
struct MpcProblem {
  Eigen::MatrixXd Ad;
  Eigen::MatrixXd Bd;
  int horizon = 1;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Eigen::MatrixXd P;
  double gamma = 0.0;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int nx() const { return static_cast<int>(Ad.rows()); }
  int nu() const { return static_cast<int>(Bd.cols()); }
  void validate() const;
};

/// Stabilizing solution of the discrete algebraic Riccati equation by
/// fixed-point iteration of the Riccati recursion from P = Q.
Eigen::MatrixXd dare_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& R, double tol = 1e-12, long max_iter = 1000000);

/// |A'PA - P - A'PB (R + B'PB)^{-1} B'PA + Q|_max
double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P);

/// Samples the continuous plant (Ac, Bc) with period delta and sets P to the
/// DARE solution of the sampled plant.
MpcProblem make_mpc_problem(const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc, double delta, int horizon,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double gamma = 0.0,
                            const Eigen::VectorXd& lower = {}, const Eigen::VectorXd& upper = {});

/// The MPC cost in terms of z for fixed x:
///   J(z, x) = z'Hz + 2 z'F x + x'Y x + penalty(z, x).
class CondensedMpc {
 public:
  explicit CondensedMpc(MpcProblem problem);

  const MpcProblem& problem() const { return problem_; }
  int nx() const { return problem_.nx(); }
  int nz() const { return problem_.horizon * problem_.nu(); }

  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::MatrixXd& F() const { return F_; }
  /// Stacked predicted states (x_2, ..., x_{H+1}) = Sx x + Su z.
  const Eigen::MatrixXd& Sx() const { return Sx_; }
  const Eigen::MatrixXd& Su() const { return Su_; }

  double cost(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const;
  /// Hessian of the quadratic part plus the penalty curvature on the active set.
  Eigen::MatrixXd generalized_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const;

  /// Strong convexity modulus lambda_min(2H).
  double strong_convexity() const { return mu_; }
  /// Gradient Lipschitz bound lambda_max(2H) + 2 gamma lambda_max(Su'Su).
  double smoothness() const { return ell_; }
  /// min(1/ell, 1.9 mu / ell^2).
  double default_step() const;

  /// K with z*(x) = -K x when gamma = 0.
  Eigen::MatrixXd unconstrained_gain() const;
  /// Picks u_1 out of z.
  Eigen::MatrixXd first_input_selector() const;

 private:
  MpcProblem problem_;
  Eigen::MatrixXd H_, F_, Y_, Sx_, Su_;
  double mu_ = 0.0;
  double ell_ = 0.0;
};

/// z <- z - step * grad J(z, x). Throws unless 0 < step < 2 mu / ell^2.
DiscreteMap gradient_map(std::shared_ptr<const CondensedMpc> mpc, double step);

enum class ZStarSolver { kNewton, kPicard };

/// Minimizer of J(., x), reported as a fixed point of the gradient map with
/// the given step. kNewton runs a damped semismooth Newton method on the
/// gradient; kPicard iterates the gradient map.
FixedPointResult mpc_zstar(const CondensedMpc& mpc, const Eigen::VectorXd& x, double step,
                           ZStarSolver solver = ZStarSolver::kNewton, double tol = 1e-12,
                           int max_iter = 100000);

/// Central-difference Jacobian of z*(x). Throws NumericalError if any solve
/// fails to converge.
Eigen::MatrixXd zstar_jacobian(const CondensedMpc& mpc, const Eigen::VectorXd& x, double step,
                               double fd_step = 0.01, ZStarSolver solver = ZStarSolver::kNewton);

struct ClosedFormMpc {
  Eigen::MatrixXd P;      // terminal weight
  Eigen::MatrixXd K;      // z* = -K x
  Eigen::MatrixXd A_cl;   // Ac - Bc Pi_1 K
  double lognorm = 0.0;   // mu_{2,P}(A_cl)
  double abscissa = 0.0;  // max real part of eig(A_cl)
};

ClosedFormMpc mpc_closed_form(const CondensedMpc& mpc, const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc);

/// Plant x' = Ac x + Bc u_1 driven by n gradient steps per period T.
CtDtSystem make_suboptimal_mpc_system(std::shared_ptr<const CondensedMpc> mpc, const Eigen::MatrixXd& Ac,
                                      const Eigen::MatrixXd& Bc, double step, int n, double T);

/// The same interconnection written as x' = Ac x + (Bc Pi_1) z,
/// z+ = -2 step F x + (I - 2 step H) z. Valid for gamma = 0.
LtiSystem suboptimal_mpc_as_lti(const CondensedMpc& mpc, const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc,
                                double step);

struct GridSpec {
  Eigen::Vector2d lower = Eigen::Vector2d(-20.0, -6.0);
  Eigen::Vector2d upper = Eigen::Vector2d(20.0, 6.0);
  int n1 = 101;
  int n2 = 101;
};

struct Contour {
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;
  Eigen::MatrixXd mu;  // mu(i, j) at (x1(i), x2(j)); NaN where a solve failed
};

/// mu_{2,P}(Ac + Bc Pi_1 dz*/dx) over a grid of two-dimensional states.
Contour rm_lognorm_contour(const CondensedMpc& mpc, const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc,
                           const Eigen::MatrixXd& P, const GridSpec& grid, double step, double fd_step = 0.01,
                           int threads = 1, ZStarSolver solver = ZStarSolver::kNewton);

/// Header x1,x2,mu; rows ordered by x1 then x2.
void write_contour_csv(std::ostream& os, const Contour& contour);

}  // namespace sdcert
