#include "sdcert/certify.h"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "sdcert/errors.h"
#include "sdcert/norms.h"

namespace sdcert {

namespace {

void require_n_T(int n, double T) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive and finite");
}

double require_zeta(const GainConstants& g) {
  if (!g.rm_rate.has_value()) throw std::invalid_argument("reduced-model rate zeta is required");
  return *g.rm_rate;
}

// sum_{i<n} L^i
double geometric_sum(double L, int n) { return (1.0 - std::pow(L, n)) / (1.0 - L); }

void require_invertible_I_minus_D(const LtiSystem& sys) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(sys.nz(), sys.nz());
  if (!Eigen::FullPivLU<Eigen::MatrixXd>(I - sys.D).isInvertible()) {
    throw std::invalid_argument("I - D is singular");
  }
}

TransientConstants transient_from(const Eigen::Matrix2d& gain, const Eigen::Matrix2d& numerator,
                                  int power, double T) {
  TransientConstants out;
  out.spectral_radius = spectral_radius(gain);
  if (!(out.spectral_radius < 1.0)) throw std::invalid_argument("gain matrix is not Schur stable");
  if (out.spectral_radius == 0.0) throw NumericalError("gain matrix has zero spectral radius");
  out.weights = perron_weights(gain);
  out.prefactor = std::pow(induced_norm_2_weighted(numerator, out.weights), power) / out.spectral_radius;
  out.decay_rate = -std::log(out.spectral_radius) / T;
  return out;
}

}  // namespace

void GainConstants::validate() const {
  for (double v : {lip_x_f, lip_z_f, lip_x_G, lip_z_G}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("Lipschitz constants must be finite and nonnegative");
    }
  }
  if (!std::isfinite(xi)) throw std::invalid_argument("xi must be finite");
  if (rm_rate.has_value() && (!(*rm_rate > 0.0) || !std::isfinite(*rm_rate))) {
    throw std::invalid_argument("reduced-model rate zeta must be positive and finite");
  }
}

void GainConstants::validate_contracting_controller() const {
  validate();
  if (!(lip_z_G < 1.0)) throw std::invalid_argument("lip_z_G must be < 1");
}

Eigen::Matrix2d bound_matrix_B(const GainConstants& g, double T) {
  g.validate();
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be finite and >= 0");
  Eigen::Matrix2d B;
  B << std::max(std::exp(g.xi * T), 1.0), g.lip_z_f * h_kernel(T, g.xi), 0.0, 1.0;
  return B;
}

bool small_gain_holds(const GainConstants& g) {
  g.validate_contracting_controller();
  return -g.xi * (1.0 - g.lip_z_G) > g.lip_z_f * g.lip_x_G;
}

Eigen::Matrix2d gain_matrix_smallgain(const GainConstants& g, int n, double T) {
  g.validate_contracting_controller();
  require_n_T(n, T);
  if (!(g.xi < 0.0)) throw std::invalid_argument("small-gain gain matrix requires xi < 0");
  const double Ln = std::pow(g.lip_z_G, n);
  const double S = geometric_sum(g.lip_z_G, n);
  const double e = std::exp(g.xi * T);
  const double a12 = g.lip_z_f * h_kernel(T, g.xi);
  Eigen::Matrix2d A;
  A << e, a12, S * g.lip_x_G * e, S * g.lip_x_G * a12 + Ln;
  return A;
}

CouplingConstants rm_coupling_constants(const GainConstants& g, int n) {
  g.validate_contracting_controller();
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const double one_minus_L = 1.0 - g.lip_z_G;
  const double Ln = std::pow(g.lip_z_G, n);
  const double k = g.lip_z_f * g.lip_x_G / one_minus_L;
  CouplingConstants c;
  c.c1 = k * (g.lip_x_f + k);
  c.c2 = Ln * k;
  c.c12 = k * g.lip_z_f;
  c.c21 = (Ln * g.lip_x_G / one_minus_L) * (g.lip_x_f + k);
  return c;
}

Eigen::Matrix2d gain_matrix_rm(const GainConstants& g, int n, double T) {
  require_n_T(n, T);
  const double zeta = require_zeta(g);
  const CouplingConstants c = rm_coupling_constants(g, n);
  const double Ln = std::pow(g.lip_z_G, n);
  const double F = -std::expm1(-zeta * T) / zeta;
  const double h = h_kernel(T, g.xi);
  Eigen::Matrix2d A;
  A << std::exp(-zeta * T) + F * h * c.c1, F * (g.lip_z_f + h * c.c12), h * c.c21, h * c.c2 + Ln;
  return A;
}

double rm_sampling_margin(const GainConstants& g, int n, double T) {
  require_n_T(n, T);
  const double zeta = require_zeta(g);
  const CouplingConstants c = rm_coupling_constants(g, n);
  return h_kernel(T, g.xi) * (c.c2 + c.c1 / zeta) + std::pow(g.lip_z_G, n) - 1.0;
}

double sampling_bound_Tn(const GainConstants& g, int n) {
  const double zeta = require_zeta(g);
  const CouplingConstants c = rm_coupling_constants(g, n);
  if (!(c.c1 > 0.0)) throw std::invalid_argument("sampling bound requires lip_z_f > 0 and lip_x_G > 0");
  const double budget = (1.0 - std::pow(g.lip_z_G, n)) / (c.c2 + c.c1 / zeta);
  if (std::abs(g.xi) < 1e-12) return budget;
  const double arg = g.xi * budget + 1.0;
  if (g.xi > 0.0) {
    if (!(arg >= 1.0)) throw NumericalError("sampling bound: log argument below 1");
    return std::log1p(g.xi * budget) / g.xi;
  }
  if (arg <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log1p(g.xi * budget) / g.xi;
}

double sampling_bound_T_infinity(const GainConstants& g) {
  const double zeta = require_zeta(g);
  const CouplingConstants c = rm_coupling_constants(g, 1);
  if (!(c.c1 > 0.0)) throw std::invalid_argument("sampling bound requires lip_z_f > 0 and lip_x_G > 0");
  const double budget = zeta / c.c1;
  if (std::abs(g.xi) < 1e-12) return budget;
  if (g.xi < 0.0 && g.xi * budget + 1.0 <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log1p(g.xi * budget) / g.xi;
}

double sampling_bound_ceiling(const GainConstants& g) {
  const double zeta = require_zeta(g);
  const CouplingConstants c = rm_coupling_constants(g, 1);
  if (!(c.c1 > 0.0)) throw std::invalid_argument("sampling bound requires lip_z_f > 0 and lip_x_G > 0");
  return zeta / c.c1;
}

TransientConstants transient_constants_smallgain(const GainConstants& g, int n, double T) {
  if (!small_gain_holds(g)) throw std::invalid_argument("small-gain condition does not hold");
  return transient_from(gain_matrix_smallgain(g, n, T), bound_matrix_B(g, T), 1, T);
}

TransientConstants transient_constants_rm(const GainConstants& g, int n, double T) {
  require_n_T(n, T);
  if (!(T < sampling_bound_Tn(g, n))) throw std::invalid_argument("T must be below the sampling bound T(n)");
  const Eigen::Matrix2d Abar = gain_matrix_rm(g, n, T);
  TransientConstants out = transient_from(Abar, bound_matrix_B(g, T), 2, T);
  Eigen::Matrix2d lift;
  lift << 1.0, 0.0, g.lip_x_G / (1.0 - g.lip_z_G), 1.0;
  const double lift_norm = induced_norm_2_weighted(lift, out.weights);
  out.prefactor *= lift_norm * lift_norm;
  return out;
}

namespace {

Certificate make_certificate(CertificateKind kind, int n, double T, const Eigen::Matrix2d& gain) {
  Certificate cert;
  cert.kind = kind;
  cert.n = n;
  cert.T = T;
  cert.gain_matrix = gain;
  cert.spectral_radius = spectral_radius(gain);
  cert.is_stable = cert.spectral_radius < 1.0;
  return cert;
}

}  // namespace

Certificate certify_small_gain(const GainConstants& g, int n, double T) {
  Certificate cert = make_certificate(CertificateKind::kSmallGain, n, T, gain_matrix_smallgain(g, n, T));
  if (small_gain_holds(g)) {
    const TransientConstants tc = transient_constants_smallgain(g, n, T);
    cert.perron_weights = tc.weights;
    cert.transient_prefactor = tc.prefactor;
    cert.decay_rate = tc.decay_rate;
  }
  return cert;
}

Certificate certify_reduced_model(const GainConstants& g, int n, double T) {
  Certificate cert = make_certificate(CertificateKind::kReducedModel, n, T, gain_matrix_rm(g, n, T));
  if (cert.is_stable && T < sampling_bound_Tn(g, n)) {
    const TransientConstants tc = transient_constants_rm(g, n, T);
    cert.perron_weights = tc.weights;
    cert.transient_prefactor = tc.prefactor;
    cert.decay_rate = tc.decay_rate;
  }
  return cert;
}

GainConstants lti_constants(const LtiSystem& sys, const Eigen::MatrixXd& Px, const Eigen::MatrixXd& Pz) {
  sys.validate();
  const QuadraticNorm nx(Px);
  const QuadraticNorm nz(Pz);
  if (nx.dim() != sys.nx() || nz.dim() != sys.nz()) throw std::invalid_argument("weight dimension mismatch");
  GainConstants g;
  g.xi = log_norm(sys.A, nx);
  g.lip_x_f = induced_norm(sys.A, nx, nx);
  g.lip_z_f = induced_norm(sys.B, nz, nx);
  g.lip_x_G = induced_norm(sys.C, nx, nz);
  g.lip_z_G = induced_norm(sys.D, nz, nz);
  const double mu = log_norm(sys.reduced_matrix(), nx);
  if (mu < 0.0) g.rm_rate = -mu;
  return g;
}

LtiExactMap lti_dtc_matrix(const LtiSystem& sys, int n, double T) {
  sys.validate();
  require_n_T(n, T);
  require_invertible_I_minus_D(sys);
  const int nx = sys.nx();
  const int nz = sys.nz();
  const ZohPair zoh = zoh_discretize(sys.A, sys.B, T);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::MatrixXd Dp = Eigen::MatrixXd::Identity(nz, nz);
  for (int i = 0; i < n; ++i) {
    S += Dp;
    Dp = Dp * sys.D;
  }
  const Eigen::MatrixXd SC = S * sys.C;
  LtiExactMap out;
  out.L.resize(nx + nz, nx + nz);
  out.L.topLeftCorner(nx, nx) = zoh.Ad;
  out.L.topRightCorner(nx, nz) = zoh.Bd;
  out.L.bottomLeftCorner(nz, nx) = SC * zoh.Ad;
  out.L.bottomRightCorner(nz, nz) = SC * zoh.Bd + Dp;
  out.spectral_radius = spectral_radius(out.L);
  out.dtc_rate = 0.5 * (1.0 + out.spectral_radius);
  out.decay_rate = -std::log(out.spectral_radius) / T;
  return out;
}

Certificate certify_lti(const LtiSystem& sys, int n, double T) {
  const LtiExactMap L = lti_dtc_matrix(sys, n, T);
  Certificate cert;
  cert.kind = CertificateKind::kLtiDtc;
  cert.n = n;
  cert.T = T;
  cert.gain_matrix = L.L;
  cert.spectral_radius = L.spectral_radius;
  cert.is_stable = L.spectral_radius < 1.0;
  cert.transient_prefactor = std::numeric_limits<double>::quiet_NaN();
  cert.decay_rate = cert.is_stable ? L.decay_rate : 0.0;
  return cert;
}

double scalar_loop_multiplier(double a, double b, double c, double d, double T) {
  if (d == 1.0) throw std::invalid_argument("scalar loop requires d != 1");
  return std::exp(a * T) + (b * c / (1.0 - d)) * h_kernel(T, a);
}

double scalar_loop_threshold(double a, double b, double c, double d) {
  if (d == 1.0) throw std::invalid_argument("scalar loop requires d != 1");
  const double k = b * c / (1.0 - d);
  if (std::abs(a) < 1e-12) {
    // m(T) = 1 + k T
    return k < 0.0 ? -3.0 / k : std::numeric_limits<double>::quiet_NaN();
  }
  const double ratio = (-2.0 * a + k) / (a + k);
  if (!(ratio > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double T = std::log(ratio) / a;
  return T > 0.0 ? T : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace sdcert
