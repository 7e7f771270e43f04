#include "sdcert/mpc.h"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sdcert/errors.h"
#include "sdcert/norms.h"
#include "sdcert/simulate.h"

namespace sdcert {

namespace {

Eigen::VectorXd tile(const Eigen::VectorXd& v, int times) {
  Eigen::VectorXd out(v.size() * times);
  for (int i = 0; i < times; ++i) out.segment(i * v.size(), v.size()) = v;
  return out;
}

double max_eig_sym(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_eig_sym(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

void MpcProblem::validate() const {
  if (Ad.rows() != Ad.cols() || Ad.rows() == 0) throw std::invalid_argument("Ad must be square");
  if (Bd.rows() != Ad.rows() || Bd.cols() == 0) throw std::invalid_argument("Bd must have nx rows");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  check_spd(Q, "Q");
  check_spd(R, "R");
  check_spd(P, "P");
  if (Q.rows() != nx() || P.rows() != nx() || R.rows() != nu()) throw std::invalid_argument("weight dimension mismatch");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite and >= 0");
  if (gamma > 0.0) {
    if (lower.size() != nx() || upper.size() != nx()) throw std::invalid_argument("state bounds have the wrong size");
    if ((lower.array() > upper.array()).any()) throw std::invalid_argument("state bounds are inverted");
  }
}

Eigen::MatrixXd dare_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                           const Eigen::MatrixXd& R, double tol, long max_iter) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols()) {
    throw std::invalid_argument("dare_solve: dimension mismatch");
  }
  check_spd(Q, "Q");
  check_spd(R, "R");
  Eigen::MatrixXd P = Q;
  for (long k = 0; k < max_iter; ++k) {
    const Eigen::MatrixXd BtPA = B.transpose() * P * A;
    const Eigen::MatrixXd S = R + B.transpose() * P * B;
    Eigen::MatrixXd Pn = A.transpose() * P * A - BtPA.transpose() * S.llt().solve(BtPA) + Q;
    Pn = 0.5 * (Pn + Pn.transpose());
    if (!Pn.allFinite()) throw NumericalError("dare_solve: iteration diverged");
    const double diff = (Pn - P).cwiseAbs().maxCoeff();
    P = std::move(Pn);
    if (diff <= tol * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      const Eigen::MatrixXd K = (R + B.transpose() * P * B).llt().solve(B.transpose() * P * A);
      if (!(spectral_radius(A - B * K) < 1.0)) throw NumericalError("dare_solve: solution is not stabilizing");
      return P;
    }
  }
  throw NumericalError("dare_solve: iteration cap reached");
}

double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtPA = B.transpose() * P * A;
  const Eigen::MatrixXd S = R + B.transpose() * P * B;
  const Eigen::MatrixXd res = A.transpose() * P * A - P - BtPA.transpose() * S.llt().solve(BtPA) + Q;
  return res.cwiseAbs().maxCoeff();
}

MpcProblem make_mpc_problem(const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc, double delta, int horizon,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, double gamma,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const ZohPair zoh = zoh_discretize(Ac, Bc, delta);
  MpcProblem p;
  p.Ad = zoh.Ad;
  p.Bd = zoh.Bd;
  p.horizon = horizon;
  p.Q = Q;
  p.R = R;
  p.P = dare_solve(p.Ad, p.Bd, Q, R);
  p.gamma = gamma;
  p.lower = lower;
  p.upper = upper;
  p.validate();
  return p;
}

CondensedMpc::CondensedMpc(MpcProblem problem) : problem_(std::move(problem)) {
  problem_.validate();
  const int nx = problem_.nx();
  const int nu = problem_.nu();
  const int H = problem_.horizon;
  Sx_ = Eigen::MatrixXd::Zero(H * nx, nx);
  Su_ = Eigen::MatrixXd::Zero(H * nx, H * nu);
  Eigen::MatrixXd Apow = Eigen::MatrixXd::Identity(nx, nx);
  std::vector<Eigen::MatrixXd> AkB;  // Ad^k Bd
  for (int r = 0; r < H; ++r) {
    AkB.push_back(Apow * problem_.Bd);
    Apow = problem_.Ad * Apow;
    Sx_.block(r * nx, 0, nx, nx) = Apow;
    for (int j = 0; j <= r; ++j) Su_.block(r * nx, j * nu, nx, nu) = AkB[r - j];
  }
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(H * nx, H * nx);
  for (int r = 0; r < H; ++r) {
    W.block(r * nx, r * nx, nx, nx) = r + 1 < H ? problem_.Q : problem_.P;
  }
  Eigen::MatrixXd Rbar = Eigen::MatrixXd::Zero(H * nu, H * nu);
  for (int r = 0; r < H; ++r) Rbar.block(r * nu, r * nu, nu, nu) = problem_.R;
  H_ = Rbar + Su_.transpose() * W * Su_;
  H_ = 0.5 * (H_ + H_.transpose());
  F_ = Su_.transpose() * W * Sx_;
  Y_ = Sx_.transpose() * W * Sx_;
  mu_ = min_eig_sym(2.0 * H_);
  ell_ = max_eig_sym(2.0 * H_);
  if (problem_.gamma > 0.0) ell_ += 2.0 * problem_.gamma * max_eig_sym(Su_.transpose() * Su_);
}

double CondensedMpc::cost(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const {
  double J = z.dot(H_ * z) + 2.0 * z.dot(F_ * x) + x.dot(Y_ * x);
  if (problem_.gamma > 0.0) {
    const Eigen::VectorXd X = Sx_ * x + Su_ * z;
    const Eigen::VectorXd lo = tile(problem_.lower, problem_.horizon);
    const Eigen::VectorXd hi = tile(problem_.upper, problem_.horizon);
    J += problem_.gamma * ((lo - X).cwiseMax(0.0).squaredNorm() + (X - hi).cwiseMax(0.0).squaredNorm());
  }
  return J;
}

Eigen::VectorXd CondensedMpc::gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const {
  if (z.size() != nz() || x.size() != nx()) throw std::invalid_argument("CondensedMpc: dimension mismatch");
  Eigen::VectorXd g = 2.0 * (H_ * z + F_ * x);
  if (problem_.gamma > 0.0) {
    const Eigen::VectorXd X = Sx_ * x + Su_ * z;
    const Eigen::VectorXd lo = tile(problem_.lower, problem_.horizon);
    const Eigen::VectorXd hi = tile(problem_.upper, problem_.horizon);
    const Eigen::VectorXd viol = (X - hi).cwiseMax(0.0) - (lo - X).cwiseMax(0.0);
    g += 2.0 * problem_.gamma * (Su_.transpose() * viol);
  }
  return g;
}

Eigen::MatrixXd CondensedMpc::generalized_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const {
  Eigen::MatrixXd Hg = 2.0 * H_;
  if (problem_.gamma > 0.0) {
    const Eigen::VectorXd X = Sx_ * x + Su_ * z;
    const Eigen::VectorXd lo = tile(problem_.lower, problem_.horizon);
    const Eigen::VectorXd hi = tile(problem_.upper, problem_.horizon);
    Eigen::VectorXd active(X.size());
    for (Eigen::Index i = 0; i < X.size(); ++i) active(i) = (X(i) < lo(i) || X(i) > hi(i)) ? 1.0 : 0.0;
    Hg += 2.0 * problem_.gamma * Su_.transpose() * active.asDiagonal() * Su_;
  }
  return Hg;
}

double CondensedMpc::default_step() const { return std::min(1.0 / ell_, 1.9 * mu_ / (ell_ * ell_)); }

Eigen::MatrixXd CondensedMpc::unconstrained_gain() const { return H_.llt().solve(F_); }

Eigen::MatrixXd CondensedMpc::first_input_selector() const {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(problem_.nu(), nz());
  S.leftCols(problem_.nu()).setIdentity();
  return S;
}

DiscreteMap gradient_map(std::shared_ptr<const CondensedMpc> mpc, double step) {
  if (!mpc) throw std::invalid_argument("gradient_map: null problem");
  const double limit = 2.0 * mpc->strong_convexity() / (mpc->smoothness() * mpc->smoothness());
  if (!(step > 0.0) || !(step < limit)) {
    throw std::invalid_argument("gradient_map: step must lie in (0, 2 mu / ell^2)");
  }
  return [mpc, step](const Eigen::VectorXd& x, const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return z - step * mpc->gradient(z, x);
  };
}

FixedPointResult mpc_zstar(const CondensedMpc& mpc, const Eigen::VectorXd& x, double step, ZStarSolver solver,
                           double tol, int max_iter) {
  if (x.size() != mpc.nx()) throw std::invalid_argument("mpc_zstar: x has the wrong size");
  if (!(step > 0.0)) throw std::invalid_argument("mpc_zstar: step must be positive");
  FixedPointResult out;
  Eigen::VectorXd z = -mpc.unconstrained_gain() * x;
  if (solver == ZStarSolver::kPicard) {
    for (int k = 0; k <= max_iter; ++k) {
      const Eigen::VectorXd delta = step * mpc.gradient(z, x);
      out.z_star = z;
      out.iterations = k;
      out.residual = delta.norm();
      if (!std::isfinite(out.residual)) throw NumericalError("mpc_zstar: non-finite iterate");
      if (out.residual <= tol) {
        out.converged = true;
        return out;
      }
      z -= delta;
    }
    return out;
  }
  Eigen::VectorXd g = mpc.gradient(z, x);
  for (int k = 0; k <= max_iter; ++k) {
    out.z_star = z;
    out.iterations = k;
    out.residual = step * g.norm();
    if (!std::isfinite(out.residual)) throw NumericalError("mpc_zstar: non-finite iterate");
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    const Eigen::VectorXd d = -mpc.generalized_hessian(z, x).llt().solve(g);
    const double J0 = mpc.cost(z, x);
    const double slope = g.dot(d);
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd zt = z + t * d;
      const Eigen::VectorXd gt = mpc.gradient(zt, x);
      if (mpc.cost(zt, x) <= J0 + 1e-4 * t * slope || gt.norm() < g.norm()) {
        z = zt;
        g = gt;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) return out;
  }
  return out;
}

Eigen::MatrixXd zstar_jacobian(const CondensedMpc& mpc, const Eigen::VectorXd& x, double step, double fd_step,
                               ZStarSolver solver) {
  if (!(fd_step > 0.0)) throw std::invalid_argument("zstar_jacobian: fd_step must be positive");
  Eigen::MatrixXd J(mpc.nz(), mpc.nx());
  for (int j = 0; j < mpc.nx(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += fd_step;
    xm(j) -= fd_step;
    const FixedPointResult fp = mpc_zstar(mpc, xp, step, solver);
    const FixedPointResult fm = mpc_zstar(mpc, xm, step, solver);
    if (!fp.converged || !fm.converged) throw NumericalError("zstar_jacobian: fixed point solve did not converge");
    J.col(j) = (fp.z_star - fm.z_star) / (2.0 * fd_step);
  }
  return J;
}

ClosedFormMpc mpc_closed_form(const CondensedMpc& mpc, const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc) {
  if (mpc.problem().gamma != 0.0) throw std::invalid_argument("mpc_closed_form requires gamma = 0");
  ClosedFormMpc out;
  out.P = mpc.problem().P;
  out.K = mpc.unconstrained_gain();
  out.A_cl = Ac - Bc * mpc.first_input_selector() * out.K;
  out.lognorm = log_norm_2_weighted(out.A_cl, out.P);
  out.abscissa = spectral_abscissa(out.A_cl);
  return out;
}

CtDtSystem make_suboptimal_mpc_system(std::shared_ptr<const CondensedMpc> mpc, const Eigen::MatrixXd& Ac,
                                      const Eigen::MatrixXd& Bc, double step, int n, double T) {
  if (!mpc) throw std::invalid_argument("make_suboptimal_mpc_system: null problem");
  if (Ac.rows() != mpc->nx() || Bc.rows() != mpc->nx() || Bc.cols() != mpc->problem().nu()) {
    throw std::invalid_argument("make_suboptimal_mpc_system: plant dimension mismatch");
  }
  CtDtSystem sys;
  const Eigen::MatrixXd Bz = Bc * mpc->first_input_selector();
  sys.f = [Ac, Bz](const Eigen::VectorXd& x, const Eigen::VectorXd& z) -> Eigen::VectorXd { return Ac * x + Bz * z; };
  sys.G = gradient_map(mpc, step);
  sys.nx = mpc->nx();
  sys.nz = mpc->nz();
  sys.n = n;
  sys.T = T;
  sys.validate();
  return sys;
}

LtiSystem suboptimal_mpc_as_lti(const CondensedMpc& mpc, const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc,
                                double step) {
  if (mpc.problem().gamma != 0.0) throw std::invalid_argument("suboptimal_mpc_as_lti requires gamma = 0");
  LtiSystem lti;
  lti.A = Ac;
  lti.B = Bc * mpc.first_input_selector();
  lti.C = -2.0 * step * mpc.F();
  lti.D = Eigen::MatrixXd::Identity(mpc.nz(), mpc.nz()) - 2.0 * step * mpc.H();
  lti.validate();
  return lti;
}

Contour rm_lognorm_contour(const CondensedMpc& mpc, const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc,
                           const Eigen::MatrixXd& P, const GridSpec& grid, double step, double fd_step, int threads,
                           ZStarSolver solver) {
  if (mpc.nx() != 2) throw std::invalid_argument("rm_lognorm_contour: state must be two-dimensional");
  if (grid.n1 < 0 || grid.n2 < 0) throw std::invalid_argument("rm_lognorm_contour: negative grid size");
  check_spd(P, "P");
  Contour c;
  c.x1 = Eigen::VectorXd::LinSpaced(grid.n1, grid.lower(0), grid.upper(0));
  c.x2 = Eigen::VectorXd::LinSpaced(grid.n2, grid.lower(1), grid.upper(1));
  c.mu = Eigen::MatrixXd::Constant(grid.n1, grid.n2, std::numeric_limits<double>::quiet_NaN());
  const Eigen::MatrixXd Bz = Bc * mpc.first_input_selector();
  const QuadraticNorm pn(P);
  auto work = [&](int worker, int stride) {
    for (int i = worker; i < grid.n1; i += stride) {
      for (int j = 0; j < grid.n2; ++j) {
        try {
          const Eigen::MatrixXd J = zstar_jacobian(mpc, Eigen::Vector2d(c.x1(i), c.x2(j)), step, fd_step, solver);
          c.mu(i, j) = log_norm(Ac + Bz * J, pn);
        } catch (const NumericalError&) {
          // left as NaN
        }
      }
    }
  };
  const int nthreads = std::max(1, std::min(threads, grid.n1));
  if (nthreads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nthreads; ++w) pool.emplace_back(work, w, nthreads);
    for (auto& t : pool) t.join();
  }
  return c;
}

void write_contour_csv(std::ostream& os, const Contour& contour) {
  os << "x1,x2,mu\n";
  for (Eigen::Index i = 0; i < contour.x1.size(); ++i) {
    for (Eigen::Index j = 0; j < contour.x2.size(); ++j) {
      os << format_double(contour.x1(i)) << ',' << format_double(contour.x2(j)) << ','
         << format_double(contour.mu(i, j)) << '\n';
    }
  }
}

}  // namespace sdcert
