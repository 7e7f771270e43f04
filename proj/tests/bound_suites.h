#pragma once

// Randomized checks of the inequalities the certificates are built from.
// Each suite draws its own instances from a seed and counts violations.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "sdcert/certify.h"
#include "sdcert/norms.h"
#include "sdcert/simulate.h"
#include "sdcert/systems.h"
#include "test_support.h"

namespace sdcert::testing {

struct SuiteResult {
  int instances = 0;
  long checks = 0;
  int violations = 0;
  double worst_excess = 0.0;  // largest (lhs - rhs) / max(1, rhs)

  void check(double lhs, double rhs, double slack) {
    ++checks;
    const double excess = (lhs - rhs) / std::max(1.0, std::abs(rhs));
    worst_excess = std::max(worst_excess, excess);
    if (!(lhs <= rhs + slack * std::max(1.0, std::abs(rhs)))) ++violations;
  }
};

inline double op2(const Eigen::MatrixXd& M) { return M.size() == 0 ? 0.0 : M.operatorNorm(); }

inline LtiSystem random_lti(Rng& rng) {
  const int nx = rng.integer(1, 4);
  const int nz = rng.integer(1, 3);
  return LtiSystem{rng.matrix(nx, nx), rng.matrix(nx, nz), rng.matrix(nz, nx),
                   rng.with_norm(nz, nz, rng.uniform(0.0, 0.9))};
}

/// LTI system that passes the small-gain test under Euclidean norms.
inline LtiSystem random_small_gain_lti(Rng& rng) {
  const int nx = rng.integer(1, 4);
  const int nz = rng.integer(1, 3);
  const Eigen::MatrixXd M = rng.matrix(nx, nx);
  const double s = rng.uniform(0.2, 3.0);
  const Eigen::MatrixXd A =
      M - (log_norm_2_weighted(M, Eigen::MatrixXd::Identity(nx, nx)) + s) * Eigen::MatrixXd::Identity(nx, nx);
  const double lzg = rng.uniform(0.0, 0.8);
  const double product = s * (1.0 - lzg) * rng.uniform(0.05, 0.9);
  const double lzf = rng.uniform(0.2, 2.0);
  return LtiSystem{A, rng.with_norm(nx, nz, lzf), rng.with_norm(nz, nx, product / lzf),
                   rng.with_norm(nz, nz, lzg)};
}

inline GainConstants euclidean_constants(const LtiSystem& s) {
  return lti_constants(s, Eigen::MatrixXd::Identity(s.nx(), s.nx()), Eigen::MatrixXd::Identity(s.nz(), s.nz()));
}

inline Eigen::Vector2d stacked_norms(const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
  return {x.norm(), z.norm()};
}

/// Largest sample-time error of the RK4 simulation against the exact
/// discrete map of an LTI loop.
inline double rk4_sample_error(const LtiSystem& s, int n, double T, double t_end, int substeps,
                               const Eigen::VectorXd& x0, const Eigen::VectorXd& z0) {
  SimulationOptions opts;
  opts.substeps = substeps;
  opts.store_substeps = false;
  const Trajectory tr = simulate_ctdt(make_lti_ctdt(s, n, T), x0, z0, t_end, opts);
  const Eigen::MatrixXd L = lti_dtc_matrix(s, n, T).L;
  Eigen::VectorXd y(s.nx() + s.nz());
  y << x0, z0;
  double worst = 0.0;
  for (std::size_t row : tr.sample_indices()) {
    Eigen::VectorXd got(y.size());
    got << tr.x[row], tr.z[row];
    worst = std::max(worst, (got - y).cwiseAbs().maxCoeff());
    y = L * y;
  }
  return worst;
}

/// Lip of G^n: Lip_x(G^n) <= Lip_x(G) (1 - L^n) / (1 - L) and
/// Lip_z(G^n) <= L^n, checked on the closed forms and on random pairs.
inline SuiteResult suite_iterated_map(std::uint64_t seed, int instances, double slack) {
  Rng rng(seed);
  SuiteResult r;
  for (int i = 0; i < instances; ++i) {
    const LtiSystem s = random_lti(rng);
    const int n = rng.integer(1, 10);
    const double L = op2(s.D);
    const double lxg = op2(s.C);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(s.nz(), s.nz());
    Eigen::MatrixXd Dp = Eigen::MatrixXd::Identity(s.nz(), s.nz());
    for (int k = 0; k < n; ++k) {
      S += Dp;
      Dp = Dp * s.D;
    }
    const double lip_x_bound = lxg * (1.0 - std::pow(L, n)) / (1.0 - L);
    r.check(op2(S * s.C), lip_x_bound, slack);
    r.check(op2(Dp), std::pow(L, n), slack);
    const CtDtSystem sys = make_lti_ctdt(s, n, 1.0);
    const Eigen::VectorXd x1 = rng.vector(s.nx()), x2 = rng.vector(s.nx());
    const Eigen::VectorXd z1 = rng.vector(s.nz()), z2 = rng.vector(s.nz());
    r.check((compose_G(sys, x1, z1, n) - compose_G(sys, x2, z1, n)).norm(), lip_x_bound * (x1 - x2).norm(), slack);
    r.check((compose_G(sys, x1, z1, n) - compose_G(sys, x1, z2, n)).norm(), std::pow(L, n) * (z1 - z2).norm(),
            slack);
    ++r.instances;
  }
  return r;
}

/// Lip of z*: Lip(z*) <= Lip_x(G) / (1 - Lip_z(G)).
inline SuiteResult suite_fixed_point_map(std::uint64_t seed, int instances, double slack) {
  Rng rng(seed);
  SuiteResult r;
  for (int i = 0; i < instances; ++i) {
    const LtiSystem s = random_lti(rng);
    const double bound = op2(s.C) / (1.0 - op2(s.D));
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(s.nz(), s.nz());
    r.check(op2((I - s.D).inverse() * s.C), bound, slack);
    const CtDtSystem sys = make_lti_ctdt(s, 1, 1.0);
    const Eigen::VectorXd x1 = rng.vector(s.nx()), x2 = rng.vector(s.nx());
    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(s.nz());
    const FixedPointResult a = fixed_point_zstar(sys, x1, z0);
    const FixedPointResult b = fixed_point_zstar(sys, x2, z0);
    if (!a.converged || !b.converged) {
      ++r.violations;
      continue;
    }
    r.check((a.z_star - b.z_star).norm(), bound * (x1 - x2).norm(), slack);
    ++r.instances;
  }
  return r;
}

/// Input-state bound: two plant solutions under constant inputs
/// satisfy |dx(t)| <= e^{xi t}|dx(0)| + Lip_z(f) h(t, xi) |du| with
/// xi = mu_2(A).
inline SuiteResult suite_input_state(std::uint64_t seed, int instances, double slack) {
  Rng rng(seed);
  SuiteResult r;
  for (int i = 0; i < instances; ++i) {
    const LtiSystem s = random_lti(rng);
    const double xi = log_norm_2_weighted(s.A, Eigen::MatrixXd::Identity(s.nx(), s.nx()));
    const double lzf = op2(s.B);
    const Eigen::VectorXd x1 = rng.vector(s.nx()), x2 = rng.vector(s.nx());
    const Eigen::VectorXd u1 = rng.vector(s.nz()), u2 = rng.vector(s.nz());
    for (int k = 1; k <= 20; ++k) {
      const double t = 0.1 * k;
      const ZohPair z = zoh_discretize(s.A, s.B, t);
      const Eigen::VectorXd d = (z.Ad * x1 + z.Bd * u1) - (z.Ad * x2 + z.Bd * u2);
      r.check(d.norm(), std::exp(xi * t) * (x1 - x2).norm() + lzf * h_kernel(t, xi) * (u1 - u2).norm(), slack);
    }
    ++r.instances;
  }
  return r;
}

inline Trajectory simulate_random(const CtDtSystem& sys, Rng& rng, int intervals, int substeps) {
  SimulationOptions opts;
  opts.substeps = substeps;
  return simulate_ctdt(sys, rng.vector(sys.nx), rng.vector(sys.nz), intervals * sys.T, opts);
}

/// Bound within an interval: for two solutions and tau in [0, T),
/// [|dx|; |dz|](kT + tau) <= B(T) [|dx|; |dz|](kT).
inline SuiteResult suite_interval_bound(std::uint64_t seed, int instances, double slack) {
  Rng rng(seed);
  SuiteResult r;
  for (int i = 0; i < instances; ++i) {
    const LtiSystem s = random_lti(rng);
    const GainConstants g = euclidean_constants(s);
    const int n = rng.integer(1, 5);
    const double T = rng.uniform(0.05, 1.0);
    const CtDtSystem sys = make_lti_ctdt(s, n, T);
    const Trajectory a = simulate_random(sys, rng, 4, 20);
    const Trajectory b = simulate_random(sys, rng, 4, 20);
    const Eigen::Matrix2d B = bound_matrix_B(g, T);
    Eigen::Vector2d at_sample = Eigen::Vector2d::Zero();
    for (std::size_t row = 0; row < a.size(); ++row) {
      const Eigen::Vector2d cur = stacked_norms(a.x[row] - b.x[row], a.z[row] - b.z[row]);
      if (a.is_sample[row]) {
        at_sample = cur;
        continue;
      }
      const Eigen::Vector2d bound = B * at_sample;
      r.check(cur(0), bound(0), slack);
      r.check(cur(1), bound(1), slack);
    }
    ++r.instances;
  }
  return r;
}

/// Intra-interval growth: |x(t) - x(kT)| <= h(T, xi) (Lip_x(f)
/// |x(kT)| + Lip_z(f) |z(kT)|) for t in [kT, (k+1)T).
inline SuiteResult suite_intra_interval(std::uint64_t seed, int instances, double slack) {
  Rng rng(seed);
  SuiteResult r;
  for (int i = 0; i < instances; ++i) {
    const LtiSystem s = random_lti(rng);
    const GainConstants g = euclidean_constants(s);
    const double T = rng.uniform(0.05, 1.0);
    const CtDtSystem sys = make_lti_ctdt(s, rng.integer(1, 5), T);
    const Trajectory tr = simulate_random(sys, rng, 4, 20);
    const double h = h_kernel(T, g.xi);
    Eigen::VectorXd x0, z0;
    for (std::size_t row = 0; row < tr.size(); ++row) {
      if (tr.is_sample[row]) {
        x0 = tr.x[row];
        z0 = tr.z[row];
        continue;
      }
      r.check((tr.x[row] - x0).norm(), h * (g.lip_x_f * x0.norm() + g.lip_z_f * z0.norm()), slack);
    }
    ++r.instances;
  }
  return r;
}

/// Sampled contraction implies exponential stability: when a
/// trajectory satisfies the sampled bound with gain A(n, T), the composite
/// norm under the Perron weights of A obeys
///   |y(t)| <= (|B(T)| / b) b^{t/T} |y(0)|,  b = rho(A).
/// Returns violations of the transient bound; instances whose sampled bound
/// fails are counted separately in sampled_failures. Scalar loops meet the
/// sampled bound with equality, so both checks use the same slack.
inline SuiteResult suite_transient(std::uint64_t seed, int instances, double slack, int* sampled_failures) {
  Rng rng(seed);
  SuiteResult r;
  *sampled_failures = 0;
  for (int i = 0; i < instances; ++i) {
    const LtiSystem s = random_small_gain_lti(rng);
    const GainConstants g = euclidean_constants(s);
    const int n = rng.integer(1, 5);
    const double T = rng.uniform(0.05, 1.0);
    const CtDtSystem sys = make_lti_ctdt(s, n, T);
    const Trajectory tr = simulate_random(sys, rng, 6, 50);
    SimulationOptions zero_opts;
    zero_opts.substeps = 50;
    const Trajectory zero =
        simulate_ctdt(sys, Eigen::VectorXd::Zero(sys.nx), Eigen::VectorXd::Zero(sys.nz), 6 * T, zero_opts);
    const Eigen::Matrix2d A = gain_matrix_smallgain(g, n, T);
    const VectorNorm xn = WeightedNorm::Unweighted(NormKind::kL2, sys.nx);
    const VectorNorm zn = WeightedNorm::Unweighted(NormKind::kL2, sys.nz);
    if (!check_dtc_bound(tr, zero, A, xn, zn, slack)) {
      ++*sampled_failures;
      continue;
    }
    const double b = spectral_radius(A);
    const Eigen::Vector2d eta = perron_weights(A);
    const WeightedNorm cmp(NormKind::kL2, eta);
    const double prefactor = induced_norm_2_weighted(bound_matrix_B(g, T), eta) / b;
    const double y0 = cmp(stacked_norms(tr.x[0], tr.z[0]));
    for (std::size_t row = 0; row < tr.size(); ++row) {
      r.check(cmp(stacked_norms(tr.x[row], tr.z[row])), prefactor * std::pow(b, tr.t[row] / T) * y0, slack);
    }
    ++r.instances;
  }
  return r;
}

/// Small-gain certificate: rho(A(n, T)) < 1 for constants passing the test
/// and (n, T) in [1, 20] x (0, 10].
inline SuiteResult suite_small_gain_radius(std::uint64_t seed, int instances) {
  Rng rng(seed);
  SuiteResult r;
  for (int i = 0; i < instances; ++i) {
    const GainConstants g = rng.small_gain_constants();
    if (!small_gain_holds(g)) {
      ++r.violations;
      continue;
    }
    const int n = rng.integer(1, 20);
    const double T = rng.uniform(1e-6, 10.0);
    ++r.checks;
    if (!(spectral_radius(gain_matrix_smallgain(g, n, T)) < 1.0)) ++r.violations;
    ++r.instances;
  }
  return r;
}

/// Reduced-model certificate at the edge of T(n): the Schur test passes at
/// 0.99 T(n) and the sufficient margin changes sign between 0.99 T(n) and
/// 1.01 T(n). Bundles with T(n) = infinity are redrawn.
inline SuiteResult suite_sampling_boundary(std::uint64_t seed, int instances) {
  Rng rng(seed);
  SuiteResult r;
  while (r.instances < instances) {
    const GainConstants g = rng.rm_constants();
    const int n = rng.integer(1, 20);
    const double Tn = sampling_bound_Tn(g, n);
    if (!std::isfinite(Tn)) continue;
    r.checks += 3;
    if (!schur_2x2_nonneg(gain_matrix_rm(g, n, 0.99 * Tn))) ++r.violations;
    if (!(rm_sampling_margin(g, n, 0.99 * Tn) < 0.0)) ++r.violations;
    if (!(rm_sampling_margin(g, n, 1.01 * Tn) > 0.0)) ++r.violations;
    ++r.instances;
  }
  return r;
}

/// Small-gain implies a contracting reduced model: random LTI systems that
/// pass the test under identity weights have mu_2(A + B (I - D)^{-1} C) < 0.
/// Half the draws are unstructured and kept only if they pass.
inline SuiteResult suite_small_gain_reduced(std::uint64_t seed, int instances) {
  Rng rng(seed);
  SuiteResult r;
  while (r.instances < instances) {
    const LtiSystem s = (r.instances % 2 == 0) ? random_small_gain_lti(rng) : random_lti(rng);
    const GainConstants g = euclidean_constants(s);
    if (!small_gain_holds(g)) continue;
    ++r.checks;
    if (!(log_norm_2_weighted(s.reduced_matrix(), Eigen::MatrixXd::Identity(s.nx(), s.nx())) < 0.0)) ++r.violations;
    ++r.instances;
  }
  return r;
}

}  // namespace sdcert::testing
