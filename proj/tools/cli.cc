#include "cli.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <locale>
#include <memory>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdcert/certify.h"
#include "sdcert/errors.h"
#include "sdcert/mpc.h"
#include "sdcert/norms.h"
#include "sdcert/simulate.h"
#include "sdcert/systems.h"

namespace sdcert::cli {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Config access

const json& require(const json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing key '" + key + "'");
  return j.at(key);
}

double as_double(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError("'" + what + "' must be a number");
  return j.get<double>();
}

double get_double(const json& j, const std::string& key, std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing key '" + key + "'");
  }
  return as_double(j.at(key), key);
}

int get_int(const json& j, const std::string& key, std::optional<int> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing key '" + key + "'");
  }
  if (!j.at(key).is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return j.at(key).get<int>();
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError("'" + key + "' must be true or false");
  return j.at(key).get<bool>();
}

Eigen::VectorXd to_vector(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError("'" + what + "' must be a non-empty array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = as_double(j[i], what);
  return v;
}

Eigen::MatrixXd to_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
    throw ConfigError("'" + what + "' must be a non-empty array of rows");
  }
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd M(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("'" + what + "' rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) M(r, c) = as_double(j[r][c], what);
  }
  return M;
}

std::vector<double> to_double_list(const json& j, const std::string& what) {
  if (j.is_number()) return {j.get<double>()};
  const Eigen::VectorXd v = to_vector(j, what);
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<int> to_int_list(const json& j, const std::string& what) {
  if (j.is_number_integer()) return {j.get<int>()};
  if (!j.is_array() || j.empty()) throw ConfigError("'" + what + "' must be an integer or a list of integers");
  std::vector<int> out;
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw ConfigError("'" + what + "' entries must be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Models

LtiSystem parse_lti(const json& j) {
  LtiSystem lti{to_matrix(require(j, "A"), "A"), to_matrix(require(j, "B"), "B"), to_matrix(require(j, "C"), "C"),
                to_matrix(require(j, "D"), "D")};
  lti.validate();
  return lti;
}

Eigen::MatrixXd weight_or_identity(const json& j, const std::string& key, int dim) {
  if (!j.contains(key)) return Eigen::MatrixXd::Identity(dim, dim);
  return to_matrix(j.at(key), key);
}

struct MpcSetup {
  Eigen::MatrixXd Ac;
  Eigen::MatrixXd Bc;
  std::shared_ptr<CondensedMpc> mpc;
  double step = 0.0;
};

MpcSetup parse_mpc(const json& j, std::optional<double> gamma_override = std::nullopt) {
  MpcSetup s;
  s.Ac = to_matrix(require(j, "A"), "A");
  s.Bc = to_matrix(require(j, "B"), "B");
  const double gamma = gamma_override ? *gamma_override : get_double(j, "gamma", 0.0);
  Eigen::VectorXd lower, upper;
  if (gamma > 0.0) {
    lower = to_vector(require(j, "lower"), "lower");
    upper = to_vector(require(j, "upper"), "upper");
  }
  MpcProblem p = make_mpc_problem(s.Ac, s.Bc, get_double(j, "delta"), get_int(j, "horizon"),
                                  to_matrix(require(j, "Q"), "Q"), to_matrix(require(j, "R"), "R"), gamma, lower,
                                  upper);
  s.mpc = std::make_shared<CondensedMpc>(std::move(p));
  s.step = j.contains("step") && !j.at("step").is_null() ? as_double(j.at("step"), "step") : s.mpc->default_step();
  return s;
}

GainConstants parse_gains(const json& j) {
  GainConstants g;
  g.lip_x_f = get_double(j, "lip_x_f");
  g.lip_z_f = get_double(j, "lip_z_f");
  g.xi = get_double(j, "xi");
  g.lip_x_G = get_double(j, "lip_x_G");
  g.lip_z_G = get_double(j, "lip_z_G");
  if (j.contains("zeta") && !j.at("zeta").is_null()) g.rm_rate = as_double(j.at("zeta"), "zeta");
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------
// Output

struct Context {
  json config;
  std::string config_hash;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out_dir;
  std::ostream* log = nullptr;
  ojson manifest;
  std::vector<std::string> outputs;
};

std::ofstream open_output(Context& ctx, const std::string& name) {
  std::ofstream os(ctx.out_dir / name, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open output file " + (ctx.out_dir / name).string());
  os.imbue(std::locale::classic());
  ctx.outputs.push_back(name);
  return os;
}

void write_manifest(Context& ctx, const std::string& command) {
  ojson m;
  m["schema_version"] = kSchemaVersion;
  m["command"] = command;
  m["config_hash"] = ctx.config_hash;
  m["seed"] = ctx.seed;
  m["results"] = ctx.manifest;
  m["outputs"] = ctx.outputs;
  std::ofstream os(ctx.out_dir / "manifest.json", std::ios::binary);
  os << m.dump(2) << '\n';
}

std::string fmt(double v) { return format_double(v); }

template <typename Fn>
void parallel_for(int count, int threads, Fn fn) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct RunResult {
  std::uint64_t seed = 0;
  double decay_rate = kNaN;
  bool diverged = false;
  Trajectory traj;
};

struct SimSettings {
  int n = 1;
  double T = 0.1;
  double t_end = 20.0;
  int runs = 1;
  SimulationOptions opts;
  bool write_trajectories = false;
};

SimSettings parse_sim(const json& j, bool default_write) {
  SimSettings s;
  s.n = get_int(j, "n", 1);
  s.T = get_double(j, "T", 0.1);
  s.t_end = get_double(j, "t_end", 20.0);
  s.runs = get_int(j, "runs", 1);
  s.opts.substeps = get_int(j, "substeps", 100);
  s.opts.update_at_zero = get_bool(j, "update_at_zero", false);
  s.opts.store_substeps = get_bool(j, "store_substeps", false);
  s.opts.divergence_threshold = get_double(j, "divergence_threshold", 1e12);
  s.write_trajectories = get_bool(j, "write_trajectories", default_write);
  if (s.runs < 1) throw ConfigError("'runs' must be >= 1");
  return s;
}

std::vector<RunResult> simulate_runs(const CtDtSystem& sys, const SimSettings& s,
                                     const std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(int, std::uint64_t)>& init,
                                     Context& ctx, bool keep_traj) {
  std::vector<RunResult> results(s.runs);
  const CompositeNorm norm = CompositeNorm::Euclidean(sys.nx, sys.nz);
  parallel_for(s.runs, ctx.threads, [&](int i) {
    RunResult& r = results[i];
    r.seed = ctx.seed + static_cast<std::uint64_t>(i);
    const auto [x0, z0] = init(i, r.seed);
    Trajectory traj = simulate_ctdt(sys, x0, z0, s.t_end, s.opts);
    r.diverged = traj.diverged;
    try {
      r.decay_rate = empirical_decay_rate(traj, norm);
    } catch (const std::invalid_argument&) {
      r.decay_rate = kNaN;
    }
    if (keep_traj) r.traj = std::move(traj);
  });
  return results;
}

void write_summary(Context& ctx, const std::vector<RunResult>& results) {
  auto os = open_output(ctx, "summary.csv");
  os << "run,seed,decay_rate,diverged\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    os << i << ',' << results[i].seed << ',' << fmt(results[i].decay_rate) << ',' << (results[i].diverged ? 1 : 0)
       << '\n';
  }
}

void write_trajectories(Context& ctx, const std::vector<RunResult>& results) {
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::ostringstream name;
    name << "traj_" << std::setw(4) << std::setfill('0') << i << ".csv";
    auto os = open_output(ctx, name.str());
    write_trajectory_csv(os, results[i].traj);
  }
}

// Mean, standard deviation and range of |y(kT)| across runs.
void write_band(Context& ctx, const std::vector<RunResult>& results) {
  auto os = open_output(ctx, "band.csv");
  os << "t,count,mean,std,min,max\n";
  std::size_t longest = 0;
  std::vector<std::vector<std::size_t>> idx;
  for (const auto& r : results) {
    idx.push_back(r.traj.sample_indices());
    longest = std::max(longest, idx.back().size());
  }
  for (std::size_t k = 0; k < longest; ++k) {
    std::vector<double> vals;
    double t = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (k >= idx[i].size()) continue;
      const std::size_t row = idx[i][k];
      t = results[i].traj.t[row];
      vals.push_back(std::sqrt(results[i].traj.x[row].squaredNorm() + results[i].traj.z[row].squaredNorm()));
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
    os << fmt(t) << ',' << vals.size() << ',' << fmt(mean) << ',' << fmt(sd) << ','
       << fmt(*std::min_element(vals.begin(), vals.end())) << ',' << fmt(*std::max_element(vals.begin(), vals.end()))
       << '\n';
  }
}

void record_rates(Context& ctx, const std::vector<RunResult>& results) {
  double worst = -std::numeric_limits<double>::infinity();
  int diverged = 0;
  for (const auto& r : results) {
    if (r.diverged) ++diverged;
    if (std::isfinite(r.decay_rate)) worst = std::max(worst, r.decay_rate);
  }
  ctx.manifest["runs"] = results.size();
  ctx.manifest["diverged_runs"] = diverged;
  ctx.manifest["max_decay_rate"] = std::isfinite(worst) ? json(worst) : json(nullptr);
}

// ---------------------------------------------------------------------------
// Commands

void cmd_certify(Context& ctx) {
  const json& cfg = ctx.config;
  const json& c = require(cfg, "certify");
  const std::vector<int> ns = to_int_list(require(c, "n"), "n");
  const std::vector<double> Ts = to_double_list(require(c, "T"), "T");

  GainConstants g;
  std::optional<LtiSystem> lti;
  if (cfg.contains("gains")) {
    g = parse_gains(cfg.at("gains"));
  } else if (cfg.contains("system")) {
    const json& s = cfg.at("system");
    lti = parse_lti(s);
    g = lti_constants(*lti, weight_or_identity(s, "Px", lti->nx()), weight_or_identity(s, "Pz", lti->nz()));
  } else if (cfg.contains("mpc")) {
    // Closed-form controller z = -Pi_1 K x as a static discrete map.
    const MpcSetup m = parse_mpc(cfg.at("mpc"), 0.0);
    const int nu = m.mpc->problem().nu();
    lti = LtiSystem{m.Ac, m.Bc, -m.mpc->first_input_selector() * m.mpc->unconstrained_gain(),
                    Eigen::MatrixXd::Zero(nu, nu)};
    g = lti_constants(*lti, m.mpc->problem().P, Eigen::MatrixXd::Identity(nu, nu));
  } else {
    throw ConfigError("certify needs one of 'gains', 'system' or 'mpc'");
  }

  {
    auto os = open_output(ctx, "constants.csv");
    os << "name,value\n";
    os << "lip_x_f," << fmt(g.lip_x_f) << "\nlip_z_f," << fmt(g.lip_z_f) << "\nxi," << fmt(g.xi) << "\nlip_x_G,"
       << fmt(g.lip_x_G) << "\nlip_z_G," << fmt(g.lip_z_G) << "\nzeta," << fmt(g.rm_rate.value_or(kNaN)) << '\n';
  }
  const bool contracting = g.lip_z_G < 1.0;
  const bool sg = contracting && small_gain_holds(g);
  ctx.manifest["small_gain"] = sg;

  auto os = open_output(ctx, "certify.csv");
  os << "n,T,rho_smallgain,rate_smallgain,prefactor_smallgain,T_n,rho_rm,rate_rm,prefactor_rm,rho_exact,rate_exact\n";
  for (int n : ns) {
    double Tn = kNaN;
    if (g.rm_rate && contracting && g.lip_z_f > 0.0 && g.lip_x_G > 0.0) Tn = sampling_bound_Tn(g, n);
    for (double T : Ts) {
      double rho_sg = kNaN, rate_sg = kNaN, pre_sg = kNaN;
      if (contracting && g.xi < 0.0) {
        const Certificate a = certify_small_gain(g, n, T);
        rho_sg = a.spectral_radius;
        if (a.perron_weights) {
          rate_sg = a.decay_rate;
          pre_sg = a.transient_prefactor;
        }
      }
      double rho_rm = kNaN, rate_rm = kNaN, pre_rm = kNaN;
      if (g.rm_rate && contracting) {
        const Certificate b = certify_reduced_model(g, n, T);
        rho_rm = b.spectral_radius;
        if (b.perron_weights) {
          rate_rm = b.decay_rate;
          pre_rm = b.transient_prefactor;
        }
      }
      double rho_ex = kNaN, rate_ex = kNaN;
      if (lti) {
        const LtiExactMap L = lti_dtc_matrix(*lti, n, T);
        rho_ex = L.spectral_radius;
        rate_ex = L.decay_rate;
      }
      os << n << ',' << fmt(T) << ',' << fmt(rho_sg) << ',' << fmt(rate_sg) << ',' << fmt(pre_sg) << ',' << fmt(Tn) << ',' << fmt(rho_rm) << ','
         << fmt(rate_rm) << ',' << fmt(pre_rm) << ',' << fmt(rho_ex) << ',' << fmt(rate_ex) << '\n';
    }
  }
  *ctx.log << "certify: small-gain " << (sg ? "holds" : "fails") << ", " << ns.size() * Ts.size()
           << " (n, T) pairs written\n";
}

void cmd_simulate(Context& ctx) {
  const json& cfg = ctx.config;
  const LtiSystem lti = parse_lti(require(cfg, "system"));
  const SimSettings s = parse_sim(require(cfg, "simulate"), true);
  const CtDtSystem sys = make_lti_ctdt(lti, s.n, s.T);
  std::vector<Eigen::VectorXd> explicit_init;
  if (cfg.at("simulate").contains("initial")) {
    const json& init = cfg.at("simulate").at("initial");
    if (!init.is_array()) throw ConfigError("'initial' must be a list of [x, z] vectors");
    for (const auto& v : init) explicit_init.push_back(to_vector(v, "initial"));
  }
  SimSettings run = s;
  if (!explicit_init.empty()) run.runs = static_cast<int>(explicit_init.size());
  const int dim = sys.nx + sys.nz;
  for (const auto& v : explicit_init) {
    if (v.size() != dim) throw ConfigError("initial states must have nx + nz entries");
  }
  const auto results = simulate_runs(
      sys, run,
      [&](int i, std::uint64_t seed) {
        const Eigen::VectorXd y = explicit_init.empty() ? random_unit_vector(seed, dim) : explicit_init[i];
        return std::make_pair(Eigen::VectorXd(y.head(sys.nx)), Eigen::VectorXd(y.tail(sys.nz)));
      },
      ctx, true);
  write_summary(ctx, results);
  if (run.write_trajectories) write_trajectories(ctx, results);
  record_rates(ctx, results);
  *ctx.log << "simulate: " << results.size() << " runs\n";
}

void cmd_mpc_closedform(Context& ctx) {
  const MpcSetup m = parse_mpc(require(ctx.config, "mpc"), 0.0);
  const ClosedFormMpc cf = mpc_closed_form(*m.mpc, m.Ac, m.Bc);
  auto os = open_output(ctx, "closedform.csv");
  os << "quantity,value\n";
  auto put_matrix = [&](const std::string& name, const Eigen::MatrixXd& M) {
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c) os << name << '_' << r + 1 << c + 1 << ',' << fmt(M(r, c)) << '\n';
    }
  };
  put_matrix("P", cf.P);
  put_matrix("K", cf.K);
  put_matrix("A_cl", cf.A_cl);
  os << "lognorm_P," << fmt(cf.lognorm) << "\nspectral_abscissa," << fmt(cf.abscissa) << '\n';
  ctx.manifest["lognorm_P"] = cf.lognorm;
  ctx.manifest["spectral_abscissa"] = cf.abscissa;
  *ctx.log << "mpc-closedform: mu_P(A_cl) = " << fmt(cf.lognorm) << ", abscissa = " << fmt(cf.abscissa) << '\n';
}

void cmd_mpc_suboptimal(Context& ctx) {
  const json& cfg = ctx.config;
  const MpcSetup m = parse_mpc(require(cfg, "mpc"));
  const json& sj = require(cfg, "simulate");
  SimSettings s = parse_sim(sj, true);
  const CtDtSystem sys = make_suboptimal_mpc_system(m.mpc, m.Ac, m.Bc, m.step, s.n, s.T);
  ctx.manifest["step"] = m.step;

  if (sj.contains("boundary")) {
    const json& b = sj.at("boundary");
    const auto x0s = box_boundary_points(to_vector(require(b, "lower"), "lower"), to_vector(require(b, "upper"), "upper"),
                                         get_int(b, "per_edge", 21));
    const Box x_box{to_vector(require(b, "state_lower"), "state_lower"),
                    to_vector(require(b, "state_upper"), "state_upper")};
    std::optional<Box> z_box;
    if (b.contains("z_lower")) z_box = Box{to_vector(b.at("z_lower"), "z_lower"), to_vector(require(b, "z_upper"), "z_upper")};
    const InvarianceReport rep =
        check_forward_invariance(sys, x0s, {Eigen::VectorXd::Zero(sys.nz)}, x_box, z_box, s.t_end, s.opts);
    ctx.manifest["invariant"] = rep.invariant;
    ctx.manifest["trajectories"] = rep.trajectories;
    ctx.manifest["max_abs_x"] = std::vector<double>(rep.max_abs_x.data(), rep.max_abs_x.data() + rep.max_abs_x.size());
    auto os = open_output(ctx, "invariance.csv");
    os << "run,decay_rate\n";
    for (std::size_t i = 0; i < rep.decay_rates.size(); ++i) os << i << ',' << fmt(rep.decay_rates[i]) << '\n';
    double worst = -std::numeric_limits<double>::infinity();
    for (double r : rep.decay_rates) worst = std::max(worst, r);
    ctx.manifest["max_decay_rate"] = worst;
    *ctx.log << "mpc-suboptimal: " << rep.trajectories << " boundary trajectories, "
             << (rep.invariant ? "no exits" : "box exited") << '\n';
    return;
  }

  const int dim = sys.nx + sys.nz;
  const auto results = simulate_runs(
      sys, s,
      [&](int, std::uint64_t seed) {
        const Eigen::VectorXd y = random_unit_vector(seed, dim);
        return std::make_pair(Eigen::VectorXd(y.head(sys.nx)), Eigen::VectorXd(y.tail(sys.nz)));
      },
      ctx, true);
  write_summary(ctx, results);
  write_band(ctx, results);
  if (s.write_trajectories) write_trajectories(ctx, results);
  record_rates(ctx, results);
  *ctx.log << "mpc-suboptimal: " << results.size() << " runs at T = " << fmt(s.T) << '\n';
}

void cmd_contour(Context& ctx) {
  const json& cfg = ctx.config;
  const json& c = require(cfg, "contour");
  const std::vector<double> gammas = to_double_list(require(c, "gammas"), "gammas");
  GridSpec grid;
  if (c.contains("lower")) grid.lower = to_vector(c.at("lower"), "lower");
  if (c.contains("upper")) grid.upper = to_vector(c.at("upper"), "upper");
  grid.n1 = get_int(c, "n1", 101);
  grid.n2 = get_int(c, "n2", 101);
  const double fd = get_double(c, "fd_step", 0.01);
  ojson summary = ojson::array();
  for (double gamma : gammas) {
    const MpcSetup m = parse_mpc(require(cfg, "mpc"), gamma);
    const Contour ct = rm_lognorm_contour(*m.mpc, m.Ac, m.Bc, m.mpc->problem().P, grid, m.step, fd, ctx.threads);
    auto os = open_output(ctx, "contour_gamma_" + fmt(gamma) + ".csv");
    write_contour_csv(os, ct);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    int missing = 0, nonneg = 0;
    for (Eigen::Index i = 0; i < ct.mu.size(); ++i) {
      const double v = ct.mu.data()[i];
      if (std::isnan(v)) {
        ++missing;
        continue;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (v >= 0.0) ++nonneg;
    }
    summary.push_back({{"gamma", gamma}, {"min", lo}, {"max", hi}, {"nonnegative_cells", nonneg}, {"missing_cells", missing}});
    *ctx.log << "contour: gamma = " << fmt(gamma) << " range [" << fmt(lo) << ", " << fmt(hi) << "], " << nonneg
             << " nonnegative cells\n";
  }
  ctx.manifest["contours"] = summary;
}

void cmd_example1(Context& ctx) {
  const json& e = require(ctx.config, "example1");
  const double a = get_double(e, "a"), b = get_double(e, "b"), c = get_double(e, "c"), d = get_double(e, "d");
  const int n = get_int(e, "n", 1);
  const int periods = get_int(e, "periods", 5);
  SimulationOptions opts;
  opts.substeps = get_int(e, "substeps", 100);
  opts.update_at_zero = true;
  opts.store_substeps = false;
  const double threshold = scalar_loop_threshold(a, b, c, d);
  ctx.manifest["threshold_T"] = std::isnan(threshold) ? json(nullptr) : json(threshold);
  std::vector<double> Ts = e.contains("T") ? to_double_list(e.at("T"), "T") : std::vector<double>{};
  if (!std::isnan(threshold)) Ts.push_back(threshold);
  auto os = open_output(ctx, "example1.csv");
  os << "T,multiplier,simulated_ratio\n";
  for (double T : Ts) {
    LtiSystem lti{Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b),
                  Eigen::MatrixXd::Constant(1, 1, c), Eigen::MatrixXd::Constant(1, 1, d)};
    const CtDtSystem sys = make_lti_ctdt(lti, n, T);
    const Trajectory traj = simulate_ctdt(sys, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), periods * T, opts);
    const auto idx = traj.sample_indices();
    double ratio = kNaN;
    if (idx.size() >= 2) ratio = traj.x[idx.back()](0) / traj.x[idx[idx.size() - 2]](0);
    os << fmt(T) << ',' << fmt(scalar_loop_multiplier(a, b, c, d, T)) << ',' << fmt(ratio) << '\n';
  }
  *ctx.log << "example1: multiplier reaches -2 at T = " << fmt(threshold) << '\n';
}

void cmd_sweep(Context& ctx) {
  const json& cfg = ctx.config;
  const MpcSetup m = parse_mpc(require(cfg, "mpc"));
  const json& w = require(cfg, "sweep");
  SimSettings s = parse_sim(require(cfg, "simulate"), false);
  const double t0 = get_double(w, "T_start", 0.1), t1 = get_double(w, "T_stop", 5.0), dt = get_double(w, "T_step", 0.1);
  const int intervals = get_int(w, "intervals", 500);
  const bool stop_first = get_bool(w, "stop_at_first_divergence", true);
  if (!(dt > 0.0) || t1 < t0 || intervals < 1) throw ConfigError("invalid sweep range");
  const bool exact = m.mpc->problem().gamma == 0.0;
  std::optional<LtiSystem> lti;
  if (exact) lti = suboptimal_mpc_as_lti(*m.mpc, m.Ac, m.Bc, m.step);

  auto os = open_output(ctx, "sweep.csv");
  os << "T,runs,diverged,max_decay_rate,rho_exact\n";
  std::optional<double> first;
  const int steps = static_cast<int>(std::floor((t1 - t0) / dt + 1e-9));
  for (int k = 0; k <= steps; ++k) {
    const double T = t0 + k * dt;
    s.T = T;
    s.t_end = intervals * T;
    const CtDtSystem sys = make_suboptimal_mpc_system(m.mpc, m.Ac, m.Bc, m.step, s.n, T);
    const int dim = sys.nx + sys.nz;
    const auto results = simulate_runs(
        sys, s,
        [&](int, std::uint64_t seed) {
          const Eigen::VectorXd y = random_unit_vector(seed, dim);
          return std::make_pair(Eigen::VectorXd(y.head(sys.nx)), Eigen::VectorXd(y.tail(sys.nz)));
        },
        ctx, false);
    int diverged = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& r : results) {
      if (r.diverged) ++diverged;
      if (std::isfinite(r.decay_rate)) worst = std::max(worst, r.decay_rate);
    }
    const double rho = lti ? lti_dtc_matrix(*lti, s.n, T).spectral_radius : kNaN;
    os << fmt(T) << ',' << results.size() << ',' << diverged << ',' << fmt(worst) << ',' << fmt(rho) << '\n';
    if (diverged > 0 && !first) {
      first = T;
      if (stop_first) break;
    }
  }
  ctx.manifest["first_diverging_T"] = first ? json(*first) : json(nullptr);
  *ctx.log << "sweep: first diverging T = " << (first ? fmt(*first) : std::string("none")) << '\n';
}

const std::vector<std::pair<std::string, std::function<void(Context&)>>>& commands() {
  static const std::vector<std::pair<std::string, std::function<void(Context&)>>> table = {
      {"certify", cmd_certify},   {"simulate", cmd_simulate}, {"mpc-closedform", cmd_mpc_closedform},
      {"mpc-suboptimal", cmd_mpc_suboptimal}, {"contour", cmd_contour}, {"example1", cmd_example1},
      {"sweep", cmd_sweep}};
  return table;
}

}  // namespace

int run_command(const RunRequest& req, std::ostream& log) {
  try {
    const auto& table = commands();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == req.command; });
    if (it == table.end()) throw ConfigError("unknown command '" + req.command + "'");
    if (req.threads < 1) throw ConfigError("--threads must be >= 1");

    std::ifstream in(req.config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + req.config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    Context ctx;
    try {
      ctx.config = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
    if (get_int(ctx.config, "schema_version") != kSchemaVersion) {
      throw ConfigError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
    }
    ctx.config_hash = fnv1a_hex(text);
    if (req.seed) {
      ctx.seed = *req.seed;
    } else if (ctx.config.contains("seed")) {
      if (!ctx.config.at("seed").is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
      ctx.seed = ctx.config.at("seed").get<std::uint64_t>();
    }
    ctx.threads = req.threads;
    ctx.out_dir = req.out_dir;
    ctx.log = &log;
    ctx.manifest = ojson::object();
    fs::create_directories(ctx.out_dir);
    it->second(ctx);
    write_manifest(ctx, req.command);
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Contraction certificates and simulations for sampled-data feedback loops"};
  app.require_subcommand(1);
  RunRequest req;
  std::uint64_t seed = 0;
  for (const auto& [name, fn] : commands()) {
    (void)fn;
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", req.config_path, "JSON config file")->required();
    sub->add_option("--out", req.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "base random seed (overrides the config)");
    sub->add_option("--threads", req.threads, "worker threads")->capture_default_str();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    req.command = sub->get_name();
    if (sub->count("--seed") > 0) req.seed = seed;
  }
  return run_command(req, std::cerr);
}

}  // namespace sdcert::cli
