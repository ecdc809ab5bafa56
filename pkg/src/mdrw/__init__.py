"""Moderate-deviation laboratory for coefficients of random matrix products."""

from .projective import (
    SquareMatrix, ProjectivePoint, DualPoint,
    act, cocycle, delta, angular_distance, coefficient_log, matrix_gauge,
)
from .laws import (
    MatrixLaw, sample, check_moment, check_proximality,
    check_strong_irreducibility, preset, PRESET_NAMES, law_from_json, law_to_json,
)
from .transfer import (
    CircleGrid, SpectralData, transfer_matrix, dominant_eigen, spectral_data,
    spectral_family, stationary_tilted, kappa_refined, perturbed_matrix,
    decay_profile, fit_exponential_decay,
)
from .cumulants import (
    CumulantData, fit_cumulants, fit_cumulants_window, cumulant_pipeline,
    growth_pipeline, cramer_zeta, solve_saddle, saddle_series, rate_value,
    rate_rhs, mde_theoretical, llt_theoretical, gaussian_upper_tail,
)
from .simulate import (
    PathBatch, TailEstimate, TiltedChain, simulate_direct, simulate_tilted,
    estimate_tail, estimate_interval, regularity_probe, delta_moment_probe,
    lyapunov_estimate, saddle_tilt_for, default_directions,
)
from .oracle import (
    WordTable, enumerate_words, exact_expectation, exact_tail_expectation,
    exact_interval_expectation, verify_change_of_measure,
)
from .smoothing import (
    SmoothingKernel, make_kernel, psi_minus, psi_minus_hat, phi_plus,
    phi_plus_hat, indicator_shape, one_sided_exp_shape, smoothing_sandwich_check,
    PartitionFamily, partition,
)

__version__ = "0.1.0"
