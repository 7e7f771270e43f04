#pragma once

#include <optional>

#include <Eigen/Dense>

#include "sdcert/systems.h"

namespace sdcert {

/// Regularity constants of a CT-DT interconnection.
///
/// xi may be negative; it bounds the one-sided Lipschitz constant of f in x.
/// rm_rate (zeta > 0) is the contraction rate of the reduced model, needed
/// only by the reduced-model certificate.
struct GainConstants {
  double lip_x_f = 0.0;
  double lip_z_f = 0.0;
  double xi = 0.0;
  double lip_x_G = 0.0;
  double lip_z_G = 0.0;
  std::optional<double> rm_rate;

  /// Throws std::invalid_argument on negative or non-finite entries.
  void validate() const;
  /// validate() plus lip_z_G < 1.
  void validate_contracting_controller() const;
};

enum class CertificateKind { kSmallGain, kReducedModel, kLtiDtc };

struct Certificate {
  CertificateKind kind = CertificateKind::kSmallGain;
  int n = 1;
  double T = 0.0;
  // A(n,T), Abar(n,T) or, for kLtiDtc, the exact sampled map L(n,T).
  Eigen::MatrixXd gain_matrix;
  double spectral_radius = 0.0;
  bool is_stable = false;
  // Filled only when is_stable; never for kLtiDtc, whose prefactor is NaN.
  std::optional<Eigen::Vector2d> perron_weights;
  double transient_prefactor = 0.0;
  double decay_rate = 0.0;  // stored positive: |y(t)| <= r e^{-decay_rate t} |y(0)|
};

struct TransientConstants {
  double prefactor = 0.0;
  double decay_rate = 0.0;  // positive
  double spectral_radius = 0.0;
  Eigen::Vector2d weights = Eigen::Vector2d::Ones();
};

/// Per-interval bound [[max(e^{xi T}, 1), lip_z_f h(T, xi)], [0, 1]].
Eigen::Matrix2d bound_matrix_B(const GainConstants& g, double T);

/// -xi (1 - lip_z_G) > lip_z_f lip_x_G. Requires lip_z_G < 1.
bool small_gain_holds(const GainConstants& g);

/// Discrete-time contraction gain for the small-gain certificate. Requires
/// xi < 0 and lip_z_G < 1.
Eigen::Matrix2d gain_matrix_smallgain(const GainConstants& g, int n, double T);

struct CouplingConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c12 = 0.0;
  double c21 = 0.0;
};

CouplingConstants rm_coupling_constants(const GainConstants& g, int n);

/// Discrete-time contraction gain for the reduced-model certificate.
Eigen::Matrix2d gain_matrix_rm(const GainConstants& g, int n, double T);

/// h(T, xi) (C2 + C1 / zeta) + L^n - 1. Negative values certify rho < 1.
double rm_sampling_margin(const GainConstants& g, int n, double T);

/// Largest T for which rm_sampling_margin is negative. Returns +infinity
/// when xi < 0 and the margin is negative for every T.
double sampling_bound_Tn(const GainConstants& g, int n);

/// Limit of sampling_bound_Tn as n grows.
double sampling_bound_T_infinity(const GainConstants& g);

/// zeta / C1.
double sampling_bound_ceiling(const GainConstants& g);

TransientConstants transient_constants_smallgain(const GainConstants& g, int n, double T);
TransientConstants transient_constants_rm(const GainConstants& g, int n, double T);

Certificate certify_small_gain(const GainConstants& g, int n, double T);
Certificate certify_reduced_model(const GainConstants& g, int n, double T);

/// Constants of an LTI interconnection under the norms |x|_Px and |z|_Pz:
/// xi = mu_Px(A), lip_z_f = |B|, lip_x_f = |A|, lip_x_G = |C|, lip_z_G = |D|,
/// zeta = -mu_Px(A + B (I - D)^{-1} C) when that is positive. Throws if
/// I - D is singular.
GainConstants lti_constants(const LtiSystem& sys, const Eigen::MatrixXd& Px, const Eigen::MatrixXd& Pz);

struct LtiExactMap {
  // Maps (x(kT), z_k) to (x((k+1)T), z_{k+1}); z_k is held on [kT, (k+1)T).
  Eigen::MatrixXd L;
  double spectral_radius = 0.0;
  double dtc_rate = 0.0;    // (1 + rho) / 2
  double decay_rate = 0.0;  // -(1/T) ln rho
};

/// Throws if I - D is singular.
LtiExactMap lti_dtc_matrix(const LtiSystem& sys, int n, double T);

Certificate certify_lti(const LtiSystem& sys, int n, double T);

/// Scalar loop x' = a x + b z, z+ = c x + d z with the controller at its
/// fixed point: x(kT) = m(T) x((k-1)T) with
///   m(T) = e^{aT} + (b c / (1 - d)) (e^{aT} - 1) / a.
double scalar_loop_multiplier(double a, double b, double c, double d, double T);

/// Sampling period at which the multiplier reaches -2, or NaN if the
/// multiplier never does.
double scalar_loop_threshold(double a, double b, double c, double d);

}  // namespace sdcert
