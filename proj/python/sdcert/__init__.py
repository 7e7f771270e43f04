"""Contraction certificates for continuous plants under sampled discrete controllers."""

from ._core import (
    __version__,
    GainConstants,
    LtiSystem,
    NumericalError,
    bound_matrix_B,
    dare_solve,
    gain_matrix_rm,
    gain_matrix_smallgain,
    h_kernel,
    induced_norm_2_weighted,
    log_norm_2_weighted,
    lti_constants,
    lti_dtc_matrix,
    mpc_closed_form,
    perron_weights,
    rm_lognorm_contour,
    sampling_bound_Tn,
    scalar_loop_multiplier,
    scalar_loop_threshold,
    schur_2x2_nonneg,
    simulate_lti,
    small_gain_holds,
    spectral_abscissa,
    spectral_radius,
    transient_constants_rm,
    transient_constants_smallgain,
    zoh_discretize,
)
