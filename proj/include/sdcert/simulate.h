#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "sdcert/certify.h"
#include "sdcert/norms.h"
#include "sdcert/systems.h"

namespace sdcert {

struct Trajectory {
  int nx = 0;
  int nz = 0;
  double T = 0.0;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> z;
  std::vector<bool> is_sample;
  bool diverged = false;

  std::size_t size() const { return t.size(); }
  /// Indices of the rows recorded at t = kT.
  std::vector<std::size_t> sample_indices() const;
};

/// Called after each integration substep and after each controller update.
/// Returning false stops the simulation.
using SimulationObserver =
    std::function<bool(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& z)>;

struct SimulationOptions {
  int substeps = 100;
  // Apply G^n to (x0, z0) at t = 0 instead of holding z0 on [0, T).
  bool update_at_zero = false;
  double divergence_threshold = 1e12;
  // Store every RK4 substep; otherwise only t = kT rows are kept.
  bool store_substeps = true;
  SimulationObserver observer;
};

/// Integrates x' = f(x, z) with RK4 over each interval with z held, then
/// applies z <- G^n(x(kT), z). Rows at t = kT hold the updated z. Stops early
/// with diverged = true once |(x, z)|_inf exceeds the divergence threshold or
/// becomes non-finite.
Trajectory simulate_ctdt(const CtDtSystem& sys, const Eigen::VectorXd& x0, const Eigen::VectorXd& z0,
                         double t_end, const SimulationOptions& opts = {});

/// Combines |x| and |z| through a weighted l2 norm on R^2.
struct CompositeNorm {
  VectorNorm x_norm;
  VectorNorm z_norm;
  Eigen::Vector2d weights = Eigen::Vector2d::Ones();

  static CompositeNorm Euclidean(int nx, int nz);
  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
};

/// Least-squares slope of log |y(kT)| against kT over the sample rows.
/// Needs at least 10 sample rows and a nonzero initial state. Later rows
/// where |y| underflows to zero are skipped.
double empirical_decay_rate(const Trajectory& traj, const CompositeNorm& norm);

/// Checks [|dx(kT)|; |dz(kT)|] <= gain [|dx((k-1)T)|; |dz((k-1)T)|] for the
/// difference of two trajectories on a common sample grid.
bool check_dtc_bound(const Trajectory& a, const Trajectory& b, const Eigen::Matrix2d& gain,
                     const VectorNorm& x_norm, const VectorNorm& z_norm, double slack = 1e-9);

struct SamplingBox {
  Eigen::VectorXd x_lo, x_hi, z_lo, z_hi;
};

struct EstimatedConstants {
  GainConstants constants;
  int num_pairs = 0;
  int num_jacobian_points = 0;
  // Relative inflation applied by conservative().
  double margin = 0.05;

  /// Lipschitz estimates scaled by (1 + margin), xi raised by margin |xi|,
  /// zeta lowered by margin zeta.
  GainConstants conservative() const;
};

/// Sampled lower estimates of the regularity constants on a box. Combines
/// difference quotients over random pairs and central-difference Jacobians
/// (step fd_step) at random points. zeta is estimated from the reduced model
/// when every fixed point solve converges.
EstimatedConstants estimate_constants(const CtDtSystem& sys, const SamplingBox& box, int num_samples,
                                      double fd_step, std::uint64_t seed,
                                      const Eigen::MatrixXd& Px, const Eigen::MatrixXd& Pz);

/// Points on the boundary of an axis-aligned box in R^2 (per_edge points per
/// edge, corners counted once) or, for other dimensions, its vertices.
std::vector<Eigen::VectorXd> box_boundary_points(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                                 int per_edge);

struct InvarianceReport {
  bool invariant = true;
  int trajectories = 0;
  std::vector<double> decay_rates;
  Eigen::VectorXd max_abs_x;
  std::optional<double> exit_time;
  std::optional<Eigen::VectorXd> exit_x0;
};

struct Box {
  Eigen::VectorXd lo, hi;
  bool contains(const Eigen::VectorXd& v) const;
};

/// Simulates from every (x0, z0) in x0s x z0s and reports whether all stay in
/// x_box (and z_box, when given) at every substep up to t_end.
InvarianceReport check_forward_invariance(const CtDtSystem& sys, const std::vector<Eigen::VectorXd>& x0s,
                                          const std::vector<Eigen::VectorXd>& z0s, const Box& x_box,
                                          const std::optional<Box>& z_box, double t_end,
                                          const SimulationOptions& opts = {});

/// Entries drawn uniformly from (0, 1) with a generator seeded by seed, then
/// scaled to unit Euclidean norm.
Eigen::VectorXd random_unit_vector(std::uint64_t seed, int dim);

/// Header t,x1..xn,z1..zm,is_sample; values with 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// 17 significant digits, independent of the global locale. Non-finite
/// values print as nan, inf, -inf.
std::string format_double(double v);

}  // namespace sdcert
