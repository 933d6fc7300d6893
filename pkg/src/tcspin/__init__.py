"""Matrix-free spin-chain spectra, dynamics and finite-size scaling tools."""

__version__ = "0.1.0"

from .dynamics import (
    CorrelationSeries,
    OscillationReport,
    TimeGrid,
    correlator_krylov,
    correlator_krylov_general,
    correlator_spectral,
    evolve,
    extract_oscillation,
    gap_frequency_consistency,
)
from .models import (
    PerturbationSpec,
    TCModelConfig,
    build_ghz,
    build_perturbation,
    build_tc_hamiltonian,
    magnetization_operator,
)
from .oscillator import (
    OscillatorConfig,
    TruncatedOscillator,
    baseline_scaling,
    cm_correlator_analytic,
    cm_correlator_numeric,
)
from .pauli import (
    Operator,
    PauliString,
    StateVector,
    apply_operator,
    apply_string,
    dense_cap,
    global_flip_operator,
    strings_commute,
    to_dense,
)
from .spectra import (
    GHZReport,
    SpectrumResult,
    dense_spectrum,
    ghz_overlap_report,
    lanczos_extremal,
    parity_expectation,
)
from .sweep import (
    OscillatorControl,
    PerturbationFamily,
    SolverSettings,
    StabilityRow,
    SweepPlan,
    SweepRecord,
    fit_power_law,
    run_sweep,
    stability_monotonicity_flags,
    stability_report,
    summarize_sweep,
)

__all__ = [
    "CorrelationSeries",
    "GHZReport",
    "Operator",
    "OscillationReport",
    "OscillatorConfig",
    "OscillatorControl",
    "PauliString",
    "PerturbationFamily",
    "PerturbationSpec",
    "SolverSettings",
    "SpectrumResult",
    "StabilityRow",
    "StateVector",
    "SweepPlan",
    "SweepRecord",
    "TCModelConfig",
    "TimeGrid",
    "TruncatedOscillator",
    "apply_operator",
    "apply_string",
    "baseline_scaling",
    "build_ghz",
    "build_perturbation",
    "build_tc_hamiltonian",
    "cm_correlator_analytic",
    "cm_correlator_numeric",
    "correlator_krylov",
    "correlator_krylov_general",
    "correlator_spectral",
    "dense_cap",
    "dense_spectrum",
    "evolve",
    "extract_oscillation",
    "fit_power_law",
    "gap_frequency_consistency",
    "ghz_overlap_report",
    "global_flip_operator",
    "lanczos_extremal",
    "magnetization_operator",
    "parity_expectation",
    "run_sweep",
    "stability_monotonicity_flags",
    "stability_report",
    "strings_commute",
    "summarize_sweep",
    "to_dense",
]
