// Acceptance run: one PASS/FAIL line per criterion. Tolerances and time
// limits are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "bound_suites.h"
#include "sdcert/certify.h"
#include "sdcert/mpc.h"
#include "sdcert/simulate.h"
#include "sdcert/systems.h"

namespace {

using namespace sdcert;
using sdcert::testing::SuiteResult;

const Eigen::MatrixXd kAc = (Eigen::MatrixXd(2, 2) << 0, 1, 0, 0).finished();
const Eigen::MatrixXd kBc = (Eigen::MatrixXd(2, 1) << 0, 1).finished();

std::shared_ptr<const CondensedMpc> double_integrator(double gamma) {
  return std::make_shared<const CondensedMpc>(make_mpc_problem(kAc, kBc, 0.2, 5, Eigen::Matrix2d::Identity(),
                                                               Eigen::MatrixXd::Identity(1, 1), gamma,
                                                               Eigen::Vector2d(-10, -3), Eigen::Vector2d(10, 3)));
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, static_cast<double>(args)...);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("criterion %2d %-34s %s  %s; %.2f s (limit %.0f s)%s\n", id, name, pass ? "PASS" : "FAIL",
              o.detail.c_str(), secs, limit_s, in_time ? "" : " TIME EXCEEDED");
  std::fflush(stdout);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> unit_start(std::uint64_t seed, int nx, int nz) {
  const Eigen::VectorXd y = random_unit_vector(seed, nx + nz);
  return {y.head(nx), y.tail(nz)};
}

Outcome closed_loop_matrix() {
  const ClosedFormMpc cf = mpc_closed_form(*double_integrator(0.0), kAc, kBc);
  const Eigen::Matrix2d expected = (Eigen::Matrix2d() << 0, 1, -0.8412, -1.5460).finished();
  const double err = (cf.A_cl - expected).cwiseAbs().maxCoeff();
  return {err <= 1e-3, fmt("A_cl = [[%.4f, %.4f], ", cf.A_cl(0, 0), cf.A_cl(0, 1)) +
                           fmt("[%.4f, %.4f]], max error %.2e", cf.A_cl(1, 0), cf.A_cl(1, 1), err)};
}

Outcome lognorm_abscissa() {
  const ClosedFormMpc cf = mpc_closed_form(*double_integrator(0.0), kAc, kBc);
  const bool ok = std::abs(cf.lognorm + 0.4407) <= 1e-3 && std::abs(cf.abscissa + 0.7730) <= 1e-3;
  return {ok, fmt("mu_P = %.6f, alpha = %.6f", cf.lognorm, cf.abscissa)};
}

Outcome single_iteration() {
  const auto mpc = double_integrator(0.0);
  const CtDtSystem sys = make_suboptimal_mpc_system(mpc, kAc, kBc, mpc->default_step(), 1, 0.1);
  const CompositeNorm norm = CompositeNorm::Euclidean(sys.nx, sys.nz);
  SimulationOptions opts;
  opts.substeps = 100;
  opts.store_substeps = false;
  int good = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const auto [x0, z0] = unit_start(1 + i, sys.nx, sys.nz);
    const Trajectory tr = simulate_ctdt(sys, x0, z0, 20.0, opts);
    const double r = tr.diverged ? INFINITY : empirical_decay_rate(tr, norm);
    worst = std::max(worst, r);
    if (r < -0.01) ++good;
  }
  return {good == 100, fmt("%.0f/100 runs with rate < -0.01, slowest rate %.4f", good, worst)};
}

Outcome large_period_instability() {
  const auto mpc = double_integrator(0.0);
  SimulationOptions opts;
  opts.substeps = 20;
  opts.store_substeps = false;
  opts.divergence_threshold = 1e12;
  for (int k = 1; k <= 50; ++k) {
    const double T = 0.1 * k;
    const CtDtSystem sys = make_suboptimal_mpc_system(mpc, kAc, kBc, mpc->default_step(), 1, T);
    int diverged = 0;
    for (int i = 0; i < 100; ++i) {
      const auto [x0, z0] = unit_start(1 + i, sys.nx, sys.nz);
      if (simulate_ctdt(sys, x0, z0, 500 * T, opts).diverged) ++diverged;
    }
    if (diverged > 0) {
      return {T <= 5.0, fmt("first diverging T = %.1f (%.0f/100 runs above 1e12)", T, diverged)};
    }
  }
  return {false, "no divergence for T <= 5"};
}

Outcome soft_invariance() {
  const auto mpc = double_integrator(10.0);
  const CtDtSystem sys = make_suboptimal_mpc_system(mpc, kAc, kBc, mpc->default_step(), 1, 0.02);
  const auto x0s = box_boundary_points(Eigen::Vector2d(-10, -3), Eigen::Vector2d(10, 3), 21);
  const Box x_box{Eigen::Vector2d(-20, -6), Eigen::Vector2d(20, 6)};
  SimulationOptions opts;
  opts.substeps = 100;
  const InvarianceReport rep =
      check_forward_invariance(sys, x0s, {Eigen::VectorXd::Zero(sys.nz)}, x_box, std::nullopt, 20.0, opts);
  double worst = -std::numeric_limits<double>::infinity();
  for (double r : rep.decay_rates) worst = std::max(worst, r);
  const bool ok = x0s.size() >= 80 && rep.invariant && static_cast<int>(rep.decay_rates.size()) == rep.trajectories &&
                  worst < 0.0;
  return {ok, fmt("%.0f boundary starts, invariant = %.0f, slowest rate %.4f", static_cast<double>(x0s.size()),
                  rep.invariant ? 1.0 : 0.0, worst) +
                  fmt(", max |x| = (%.3f, %.3f)", rep.max_abs_x(0), rep.max_abs_x(1))};
}

Outcome contour_signs() {
  GridSpec grid;
  grid.n1 = 51;
  grid.n2 = 51;
  const int threads = static_cast<int>(std::max(1u, std::min(8u, std::thread::hardware_concurrency())));
  const Eigen::MatrixXd P = double_integrator(0.0)->problem().P;
  auto run = [&](double gamma) {
    const auto mpc = double_integrator(gamma);
    return rm_lognorm_contour(*mpc, kAc, kBc, P, grid, mpc->default_step(), 0.01, threads);
  };
  const Contour c0 = run(0.0);
  const Contour c10 = run(10.0);
  const Contour c100 = run(100.0);
  const double dev0 = (c0.mu.array() + 0.4407).abs().maxCoeff();
  const double origin10 = c10.mu(25, 25);
  double max100 = -std::numeric_limits<double>::infinity();
  int nonneg = 0;
  for (Eigen::Index i = 0; i < c100.mu.size(); ++i) {
    const double v = c100.mu.data()[i];
    if (!std::isnan(v)) max100 = std::max(max100, v);
    if (v >= 0.0) ++nonneg;
  }
  const bool ok = c0.mu.allFinite() && dev0 <= 2e-3 && c10.x1(25) == 0.0 && c10.x2(25) == 0.0 && origin10 < 0.0 &&
                  nonneg >= 1;
  return {ok, fmt("gamma=0 max |mu + 0.4407| = %.2e, gamma=10 mu(0) = %.4f, ", dev0, origin10) +
                  fmt("gamma=100 max mu = %.4f over %.0f nonnegative cells", max100, nonneg)};
}

Outcome suite_outcome(const SuiteResult& r, int expected) {
  return {r.violations == 0 && r.instances == expected,
          fmt("%.0f instances, %.0f checks, %.0f violations", r.instances, static_cast<double>(r.checks),
              r.violations)};
}

Outcome rk4_oracle() {
  LtiSystem s;
  s.A = (Eigen::MatrixXd(2, 2) << 0, 1, -2, -0.5).finished();
  s.B = (Eigen::MatrixXd(2, 1) << 0, 1).finished();
  s.C = (Eigen::MatrixXd(1, 2) << -1, -1).finished();
  s.D = Eigen::MatrixXd::Constant(1, 1, 0.3);
  const Eigen::Vector2d x0(1, -1);
  const Eigen::VectorXd z0 = Eigen::VectorXd::Ones(1);
  const double e100 = testing::rk4_sample_error(s, 2, 0.5, 10.0, 100, x0, z0);
  const double e10 = testing::rk4_sample_error(s, 2, 0.5, 10.0, 10, x0, z0);
  const double e20 = testing::rk4_sample_error(s, 2, 0.5, 10.0, 20, x0, z0);
  const double ratio = e10 / e20;
  return {e100 <= 1e-6 && ratio >= 12.0 && ratio <= 20.0,
          fmt("error at 100 substeps %.2e, halving ratio (10 -> 20 substeps) %.3f", e100, ratio)};
}

Outcome example_loop() {
  const double a = 1, b = 1, c = -3, d = 0;
  const LtiSystem lti{Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b),
                      Eigen::MatrixXd::Constant(1, 1, c), Eigen::MatrixXd::Constant(1, 1, d)};
  SimulationOptions opts;
  opts.update_at_zero = true;
  opts.store_substeps = false;
  double worst = 0.0;
  for (double T : {0.1, 0.3, 0.5, 0.7, 1.2, std::log(2.5)}) {
    const Trajectory tr =
        simulate_ctdt(make_lti_ctdt(lti, 1, T), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 5 * T, opts);
    const double m = scalar_loop_multiplier(a, b, c, d, T);
    const auto idx = tr.sample_indices();
    for (std::size_t k = 1; k < idx.size(); ++k) {
      worst = std::max(worst, std::abs(tr.x[idx[k]](0) / tr.x[idx[k - 1]](0) - m));
    }
  }
  const double m_threshold = scalar_loop_multiplier(a, b, c, d, std::log(2.5));
  const bool ok = worst <= 1e-6 && std::abs(m_threshold + 2.0) <= 1e-9;
  return {ok, fmt("max ratio error %.2e, multiplier at ln 2.5 = %.12f", worst, m_threshold)};
}

Outcome bound_suite_outcome() {
  constexpr double kSlack = 1e-6;
  int sampled_failures = 0;
  const std::vector<std::pair<const char*, SuiteResult>> suites = {
      {"interval", testing::suite_interval_bound(201, 1000, kSlack)},
      {"iterated", testing::suite_iterated_map(202, 1000, kSlack)},
      {"fixed-point", testing::suite_fixed_point_map(203, 1000, kSlack)},
      {"input-state", testing::suite_input_state(204, 1000, kSlack)},
      {"intra-interval", testing::suite_intra_interval(205, 1000, kSlack)},
      {"transient", testing::suite_transient(206, 1000, kSlack, &sampled_failures)},
  };
  bool ok = sampled_failures == 0;
  std::string detail;
  for (const auto& [name, r] : suites) {
    ok = ok && r.violations == 0 && r.instances == 1000;
    detail += std::string(name) + fmt(" %.0f/%.0f, ", r.violations, r.instances);
  }
  return {ok, "violations/instances: " + detail + fmt("sampled-bound failures %.0f", sampled_failures)};
}

}  // namespace

int main() {
  criterion(1, "closed-loop matrix", 1, closed_loop_matrix);
  criterion(2, "log norm and abscissa", 1, lognorm_abscissa);
  criterion(3, "single-iteration stability", 30, single_iteration);
  criterion(4, "instability at large T", 60, large_period_instability);
  criterion(5, "soft-constrained invariance", 60, soft_invariance);
  criterion(6, "contour signs (51 x 51)", 300, contour_signs);
  criterion(7, "small-gain radius", 10, [] { return suite_outcome(testing::suite_small_gain_radius(7, 10000), 10000); });
  criterion(8, "sampling-period boundary", 10, [] { return suite_outcome(testing::suite_sampling_boundary(8, 1000), 1000); });
  criterion(9, "small gain implies RM contraction", 10,
            [] { return suite_outcome(testing::suite_small_gain_reduced(9, 1000), 1000); });
  criterion(10, "RK4 vs exact discretization", 10, rk4_oracle);
  criterion(11, "scalar loop example", 1, example_loop);
  criterion(12, "bound suites", 60, bound_suite_outcome);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
