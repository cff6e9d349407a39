"""Entangled-probe target detection in thermal noise, on truncated Fock spaces.

The package models a weak-reflectivity bosonic channel probed by
signal-idler entangled states and quantifies how well the return
distinguishes "target present" from "target absent": quantum Fisher
information of the reflectivity at zero, fidelity / Helstrom / Chernoff
discrimination bounds, the count-difference interferometric receiver
with its SNR and Monte-Carlo error rates, and deterministic optimizers
for the probe shape.  The ``illumina`` command line renders the standard
figure tables as CSV.
"""

__version__ = "0.1.0"

from .fock import (
    EPS_EIG,
    DensityOperator,
    EigenSystem,
    InvalidDimensionError,
    ModeSpace,
    StateVector,
    annihilation,
    embed,
    expectation,
    hermitian_eigen,
    matrix_power,
    partial_trace,
    trace_norm,
)
from .states import (
    DEFAULT_POLICY,
    CoherentProbe,
    NpeState,
    TruncationOverflowError,
    TruncationPolicy,
    coherent_pair,
    coherent_vector,
    idler_reduced,
    npe_vector,
    signal_energy,
    thermal_density,
    thermal_weights,
    tmsv_vector,
)
from .channel import (
    ChannelParams,
    apply_channel,
    bs_apply,
    drho_deta_at_zero,
    generator,
    idler_step_operator,
    thermal_ladder_commutators,
)
from .metrology import (
    DiscriminationReport,
    ErrorBounds,
    QfiReport,
    bhattacharyya,
    chernoff,
    discriminate,
    error_bounds_from_qfi,
    fidelity,
    fidelity_error_bounds,
    helstrom_error,
    qfi_at_zero,
    qfi_coherent_closed,
    qfi_product_fast,
)
from .measurement import (
    MomentReport,
    OutcomePmf,
    SnrReport,
    m_operator,
    moments,
    outcome_pmf,
    p_err_gaussian,
    p_err_gaussian_threshold,
    simulate_detection,
    snr,
    snr_coherent_closed,
)
from .optimize import (
    OptimOptions,
    OptimResult,
    SweepRow,
    energy_fraction_sweep,
    optimize_coherent_snr,
    optimize_npe_qfi,
    optimize_npe_snr,
)

__all__ = [
    "__version__",
    "EPS_EIG",
    "DensityOperator",
    "EigenSystem",
    "InvalidDimensionError",
    "ModeSpace",
    "StateVector",
    "annihilation",
    "embed",
    "expectation",
    "hermitian_eigen",
    "matrix_power",
    "partial_trace",
    "trace_norm",
    "DEFAULT_POLICY",
    "CoherentProbe",
    "NpeState",
    "TruncationOverflowError",
    "TruncationPolicy",
    "coherent_pair",
    "coherent_vector",
    "idler_reduced",
    "npe_vector",
    "signal_energy",
    "thermal_density",
    "thermal_weights",
    "tmsv_vector",
    "ChannelParams",
    "apply_channel",
    "bs_apply",
    "drho_deta_at_zero",
    "generator",
    "idler_step_operator",
    "thermal_ladder_commutators",
    "DiscriminationReport",
    "ErrorBounds",
    "QfiReport",
    "bhattacharyya",
    "chernoff",
    "discriminate",
    "error_bounds_from_qfi",
    "fidelity",
    "fidelity_error_bounds",
    "helstrom_error",
    "qfi_at_zero",
    "qfi_coherent_closed",
    "qfi_product_fast",
    "MomentReport",
    "OutcomePmf",
    "SnrReport",
    "m_operator",
    "moments",
    "outcome_pmf",
    "p_err_gaussian",
    "p_err_gaussian_threshold",
    "simulate_detection",
    "snr",
    "snr_coherent_closed",
    "OptimOptions",
    "OptimResult",
    "SweepRow",
    "energy_fraction_sweep",
    "optimize_coherent_snr",
    "optimize_npe_qfi",
    "optimize_npe_snr",
]
