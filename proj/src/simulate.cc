#include "sdcert/simulate.h"

#include <charconv>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "sdcert/errors.h"

namespace sdcert {

std::vector<std::size_t> Trajectory::sample_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < is_sample.size(); ++i) {
    if (is_sample[i]) idx.push_back(i);
  }
  return idx;
}

namespace {

bool exceeds(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double threshold) {
  if (!x.allFinite() || !z.allFinite()) return true;
  const double m = std::max(x.size() ? x.cwiseAbs().maxCoeff() : 0.0, z.size() ? z.cwiseAbs().maxCoeff() : 0.0);
  return m > threshold;
}

void record(Trajectory& traj, double t, const Eigen::VectorXd& x, const Eigen::VectorXd& z, bool sample) {
  traj.t.push_back(t);
  traj.x.push_back(x);
  traj.z.push_back(z);
  traj.is_sample.push_back(sample);
}

}  // namespace

Trajectory simulate_ctdt(const CtDtSystem& sys, const Eigen::VectorXd& x0, const Eigen::VectorXd& z0,
                         double t_end, const SimulationOptions& opts) {
  sys.validate();
  if (x0.size() != sys.nx || z0.size() != sys.nz) throw std::invalid_argument("initial condition has the wrong size");
  if (!x0.allFinite() || !z0.allFinite()) throw std::invalid_argument("initial condition must be finite");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be finite and >= 0");
  if (opts.substeps < 1) throw std::invalid_argument("substeps must be >= 1");

  Trajectory traj;
  traj.nx = sys.nx;
  traj.nz = sys.nz;
  traj.T = sys.T;
  const long intervals = static_cast<long>(std::floor(t_end / sys.T + 1e-9));
  const double h = sys.T / opts.substeps;

  Eigen::VectorXd x = x0;
  Eigen::VectorXd z = opts.update_at_zero ? compose_G(sys, x0, z0, sys.n) : z0;
  record(traj, 0.0, x, z, true);
  if (exceeds(x, z, opts.divergence_threshold)) {
    traj.diverged = true;
    return traj;
  }
  if (opts.observer && !opts.observer(0.0, x, z)) return traj;

  for (long k = 0; k < intervals; ++k) {
    const double t0 = static_cast<double>(k) * sys.T;
    for (int s = 1; s <= opts.substeps; ++s) {
      const Eigen::VectorXd k1 = sys.eval_f(x, z);
      const Eigen::VectorXd k2 = sys.eval_f(x + 0.5 * h * k1, z);
      const Eigen::VectorXd k3 = sys.eval_f(x + 0.5 * h * k2, z);
      const Eigen::VectorXd k4 = sys.eval_f(x + h * k3, z);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const bool last = s == opts.substeps;
      const double t = last ? static_cast<double>(k + 1) * sys.T : t0 + s * h;
      if (!last && opts.store_substeps) record(traj, t, x, z, false);
      if (exceeds(x, z, opts.divergence_threshold)) {
        if (last || !opts.store_substeps) record(traj, t, x, z, false);
        traj.diverged = true;
        return traj;
      }
      if (opts.observer && !opts.observer(t, x, z)) {
        if (last || !opts.store_substeps) record(traj, t, x, z, false);
        return traj;
      }
    }
    z = compose_G(sys, x, z, sys.n);
    record(traj, static_cast<double>(k + 1) * sys.T, x, z, true);
    if (exceeds(x, z, opts.divergence_threshold)) {
      traj.diverged = true;
      return traj;
    }
  }
  return traj;
}

CompositeNorm CompositeNorm::Euclidean(int nx, int nz) {
  return {WeightedNorm::Unweighted(NormKind::kL2, nx), WeightedNorm::Unweighted(NormKind::kL2, nz),
          Eigen::Vector2d::Ones()};
}

double CompositeNorm::operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  const double a = norm_of(x_norm, x);
  const double b = norm_of(z_norm, z);
  return std::sqrt(weights(0) * a * a + weights(1) * b * b);
}

double empirical_decay_rate(const Trajectory& traj, const CompositeNorm& norm) {
  const std::vector<std::size_t> rows = traj.sample_indices();
  if (rows.size() < 10) throw std::invalid_argument("empirical_decay_rate: need at least 10 sample rows");
  if (!(norm(traj.x[rows[0]], traj.z[rows[0]]) > 0.0)) {
    throw std::invalid_argument("empirical_decay_rate: trajectory starts at the equilibrium");
  }
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  int count = 0;
  for (std::size_t i : rows) {
    const double v = norm(traj.x[i], traj.z[i]);
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    const double ly = std::log(v);
    st += traj.t[i];
    sy += ly;
    stt += traj.t[i] * traj.t[i];
    sty += traj.t[i] * ly;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("empirical_decay_rate: need at least two nonzero samples");
  const double denom = count * stt - st * st;
  if (!(denom > 0.0)) throw std::invalid_argument("empirical_decay_rate: degenerate sample times");
  return (count * sty - st * sy) / denom;
}

bool check_dtc_bound(const Trajectory& a, const Trajectory& b, const Eigen::Matrix2d& gain,
                     const VectorNorm& x_norm, const VectorNorm& z_norm, double slack) {
  const auto ia = a.sample_indices();
  const auto ib = b.sample_indices();
  const std::size_t count = std::min(ia.size(), ib.size());
  Eigen::Vector2d prev;
  for (std::size_t k = 0; k < count; ++k) {
    if (std::abs(a.t[ia[k]] - b.t[ib[k]]) > 1e-9 * std::max(1.0, a.t[ia[k]])) {
      throw std::invalid_argument("check_dtc_bound: trajectories have different sample times");
    }
    const Eigen::Vector2d cur(norm_of(x_norm, a.x[ia[k]] - b.x[ib[k]]), norm_of(z_norm, a.z[ia[k]] - b.z[ib[k]]));
    if (k > 0) {
      const Eigen::Vector2d bound = gain * prev;
      for (int i = 0; i < 2; ++i) {
        if (cur(i) > bound(i) + slack * std::max(1.0, bound(i))) return false;
      }
    }
    prev = cur;
  }
  return true;
}

GainConstants EstimatedConstants::conservative() const {
  GainConstants g = constants;
  const double s = 1.0 + margin;
  g.lip_x_f *= s;
  g.lip_z_f *= s;
  g.lip_x_G *= s;
  g.lip_z_G *= s;
  g.xi += margin * std::abs(g.xi);
  if (g.rm_rate) {
    const double zeta = *g.rm_rate * (1.0 - margin);
    g.rm_rate = zeta > 0.0 ? std::optional<double>(zeta) : std::nullopt;
  }
  return g;
}

namespace {

Eigen::VectorXd uniform_in(std::mt19937_64& rng, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd v(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    std::uniform_real_distribution<double> d(lo(i), hi(i));
    v(i) = d(rng);
  }
  return v;
}

// Central-difference Jacobian of v -> F(v).
template <typename F>
Eigen::MatrixXd jacobian(const F& fun, const Eigen::VectorXd& v, double step) {
  const Eigen::VectorXd f0 = fun(v);
  Eigen::MatrixXd J(f0.size(), v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    Eigen::VectorXd vp = v, vm = v;
    vp(j) += step;
    vm(j) -= step;
    J.col(j) = (fun(vp) - fun(vm)) / (2.0 * step);
  }
  return J;
}

}  // namespace

EstimatedConstants estimate_constants(const CtDtSystem& sys, const SamplingBox& box, int num_samples,
                                      double fd_step, std::uint64_t seed,
                                      const Eigen::MatrixXd& Px, const Eigen::MatrixXd& Pz) {
  sys.validate();
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
  if (box.x_lo.size() != sys.nx || box.x_hi.size() != sys.nx || box.z_lo.size() != sys.nz ||
      box.z_hi.size() != sys.nz) {
    throw std::invalid_argument("sampling box has the wrong dimension");
  }
  if ((box.x_hi.array() < box.x_lo.array()).any() || (box.z_hi.array() < box.z_lo.array()).any()) {
    throw std::invalid_argument("sampling box bounds are inverted");
  }
  const QuadraticNorm nx(Px);
  const QuadraticNorm nz(Pz);
  const Eigen::MatrixXd& P = nx.weight();
  std::mt19937_64 rng(seed);

  EstimatedConstants est;
  GainConstants& g = est.constants;
  g.xi = -std::numeric_limits<double>::infinity();
  double oslip_rm = -std::numeric_limits<double>::infinity();
  bool rm_ok = true;

  auto zstar = [&](const Eigen::VectorXd& x, bool* ok) {
    const FixedPointResult fp = fixed_point_zstar(sys, x, Eigen::VectorXd::Zero(sys.nz));
    if (!fp.converged) *ok = false;
    return fp.z_star;
  };

  for (int i = 0; i < num_samples; ++i) {
    const Eigen::VectorXd x1 = uniform_in(rng, box.x_lo, box.x_hi);
    const Eigen::VectorXd x2 = uniform_in(rng, box.x_lo, box.x_hi);
    const Eigen::VectorXd z1 = uniform_in(rng, box.z_lo, box.z_hi);
    const Eigen::VectorXd z2 = uniform_in(rng, box.z_lo, box.z_hi);
    const Eigen::VectorXd dx = x1 - x2;
    const Eigen::VectorXd dz = z1 - z2;
    const double ndx = nx(dx);
    const double ndz = nz(dz);
    if (ndx > 0.0) {
      const Eigen::VectorXd df = sys.eval_f(x1, z1) - sys.eval_f(x2, z1);
      g.lip_x_f = std::max(g.lip_x_f, nx(df) / ndx);
      g.xi = std::max(g.xi, df.dot(P * dx) / (ndx * ndx));
      g.lip_x_G = std::max(g.lip_x_G, nz(sys.eval_G(x1, z1) - sys.eval_G(x2, z1)) / ndx);
    }
    if (ndz > 0.0) {
      g.lip_z_f = std::max(g.lip_z_f, nx(sys.eval_f(x1, z1) - sys.eval_f(x1, z2)) / ndz);
      g.lip_z_G = std::max(g.lip_z_G, nz(sys.eval_G(x1, z1) - sys.eval_G(x1, z2)) / ndz);
    }
    ++est.num_pairs;
  }

  const int jac_points = std::max(1, num_samples / 100);
  for (int i = 0; i < jac_points; ++i) {
    const Eigen::VectorXd x = uniform_in(rng, box.x_lo, box.x_hi);
    const Eigen::VectorXd z = uniform_in(rng, box.z_lo, box.z_hi);
    const Eigen::MatrixXd fx = jacobian([&](const Eigen::VectorXd& v) { return sys.eval_f(v, z); }, x, fd_step);
    const Eigen::MatrixXd fz = jacobian([&](const Eigen::VectorXd& v) { return sys.eval_f(x, v); }, z, fd_step);
    const Eigen::MatrixXd gx = jacobian([&](const Eigen::VectorXd& v) { return sys.eval_G(v, z); }, x, fd_step);
    const Eigen::MatrixXd gz = jacobian([&](const Eigen::VectorXd& v) { return sys.eval_G(x, v); }, z, fd_step);
    g.lip_x_f = std::max(g.lip_x_f, induced_norm(fx, nx, nx));
    g.xi = std::max(g.xi, log_norm(fx, nx));
    g.lip_z_f = std::max(g.lip_z_f, induced_norm(fz, nz, nx));
    g.lip_x_G = std::max(g.lip_x_G, induced_norm(gx, nx, nz));
    g.lip_z_G = std::max(g.lip_z_G, induced_norm(gz, nz, nz));
    if (rm_ok) {
      const Eigen::MatrixXd rm = jacobian(
          [&](const Eigen::VectorXd& v) { return sys.eval_f(v, zstar(v, &rm_ok)); }, x, fd_step);
      oslip_rm = std::max(oslip_rm, log_norm(rm, nx));
    }
    ++est.num_jacobian_points;
  }
  if (!std::isfinite(g.xi)) g.xi = 0.0;
  if (rm_ok && oslip_rm < 0.0) g.rm_rate = -oslip_rm;
  return est;
}

std::vector<Eigen::VectorXd> box_boundary_points(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                                 int per_edge) {
  if (lo.size() != hi.size() || lo.size() == 0) throw std::invalid_argument("box bounds dimension mismatch");
  std::vector<Eigen::VectorXd> pts;
  if (lo.size() == 2) {
    if (per_edge < 2) throw std::invalid_argument("per_edge must be >= 2");
    auto lerp = [&](int i, int d) { return lo(d) + (hi(d) - lo(d)) * i / (per_edge - 1); };
    for (int i = 0; i < per_edge - 1; ++i) pts.push_back(Eigen::Vector2d(lerp(i, 0), lo(1)));
    for (int i = 0; i < per_edge - 1; ++i) pts.push_back(Eigen::Vector2d(hi(0), lerp(i, 1)));
    for (int i = per_edge - 1; i > 0; --i) pts.push_back(Eigen::Vector2d(lerp(i, 0), hi(1)));
    for (int i = per_edge - 1; i > 0; --i) pts.push_back(Eigen::Vector2d(lo(0), lerp(i, 1)));
    return pts;
  }
  const Eigen::Index n = lo.size();
  if (n > 20) throw std::invalid_argument("box_boundary_points: dimension too large");
  for (long mask = 0; mask < (1L << n); ++mask) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = (mask >> i) & 1 ? hi(i) : lo(i);
    pts.push_back(v);
  }
  return pts;
}

bool Box::contains(const Eigen::VectorXd& v) const {
  return !(v.array() < lo.array()).any() && !(v.array() > hi.array()).any();
}

InvarianceReport check_forward_invariance(const CtDtSystem& sys, const std::vector<Eigen::VectorXd>& x0s,
                                          const std::vector<Eigen::VectorXd>& z0s, const Box& x_box,
                                          const std::optional<Box>& z_box, double t_end,
                                          const SimulationOptions& opts) {
  if (x_box.lo.size() != sys.nx || x_box.hi.size() != sys.nx) {
    throw std::invalid_argument("invariance box for x has the wrong size");
  }
  if (z_box && (z_box->lo.size() != sys.nz || z_box->hi.size() != sys.nz)) {
    throw std::invalid_argument("invariance box for z has the wrong size");
  }
  for (const auto& x0 : x0s) {
    if (!x_box.contains(x0)) throw std::invalid_argument("initial state lies outside the invariance box");
  }
  InvarianceReport report;
  report.max_abs_x = Eigen::VectorXd::Zero(sys.nx);
  const CompositeNorm norm = CompositeNorm::Euclidean(sys.nx, sys.nz);
  for (const auto& x0 : x0s) {
    for (const auto& z0 : z0s) {
      SimulationOptions o = opts;
      o.store_substeps = false;
      bool inside = true;
      double exit_t = 0.0;
      o.observer = [&](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        report.max_abs_x = report.max_abs_x.cwiseMax(x.cwiseAbs());
        if (!x_box.contains(x) || (z_box && !z_box->contains(z))) {
          inside = false;
          exit_t = t;
          return false;
        }
        return true;
      };
      const Trajectory traj = simulate_ctdt(sys, x0, z0, t_end, o);
      ++report.trajectories;
      if (traj.diverged) inside = false;
      if (!inside && report.invariant) {
        report.invariant = false;
        report.exit_time = exit_t;
        report.exit_x0 = x0;
      }
      if (inside) report.decay_rates.push_back(empirical_decay_rate(traj, norm));
    }
  }
  return report;
}

Eigen::VectorXd random_unit_vector(std::uint64_t seed, int dim) {
  if (dim < 1) throw std::invalid_argument("random_unit_vector: dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = u(rng);
  const double n = v.norm();
  if (!(n > 0.0)) throw NumericalError("random_unit_vector: zero draw");
  return v / n;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t";
  for (int i = 1; i <= traj.nx; ++i) os << ",x" << i;
  for (int i = 1; i <= traj.nz; ++i) os << ",z" << i;
  os << ",is_sample\n";
  for (std::size_t r = 0; r < traj.size(); ++r) {
    os << format_double(traj.t[r]);
    for (int i = 0; i < traj.nx; ++i) os << ',' << format_double(traj.x[r](i));
    for (int i = 0; i < traj.nz; ++i) os << ',' << format_double(traj.z[r](i));
    os << ',' << (traj.is_sample[r] ? 1 : 0) << '\n';
  }
}

}  // namespace sdcert
