"""magcomb: magnonic frequency combs in a dissipatively coupled cavity
magnomechanical system.

Deterministic three-mode simulation, comb spectroscopy, Lyapunov chaos
diagnostics, and parameter sweeps.
"""

from .errors import ConfigError, InsufficientComb, IntegrationDiverged, StepUnderflow
from .model import (
    GYRO_YIG,
    LinearSteadyState,
    ModeState,
    PhysicalParams,
    ScaledParams,
    compute_rabi,
    default_params,
    gamma_star,
    kittel_frequency,
    linear_steady_state,
    rhs,
)
from .integrator import (
    CrossCheckReport,
    IntegrationConfig,
    Trajectory,
    cross_check,
    export_trajectory,
    integrate,
    load_trajectory_csv,
    rk4_step,
)
from .spectral import (
    CombAnalysis,
    CombTooth,
    PlateauResult,
    Spectrum,
    analyze_comb,
    detect_teeth,
    estimate_anchor,
    estimate_repetition,
    export_comb,
    export_spectrum,
    measure_plateau_cutoff,
    power_spectrum,
    spectral_flatness,
)
from .analysis import (
    LyapunovResult,
    SweepResult,
    SweepRow,
    SweepSpec,
    classify_regime,
    export_contour,
    export_manifest,
    export_sweep,
    lyapunov_largest,
    run_sweep,
    steady_magnon_number,
    sweep_point,
)

__version__ = "0.1.0"

__all__ = [
    "GYRO_YIG",
    "CombAnalysis",
    "CombTooth",
    "ConfigError",
    "CrossCheckReport",
    "InsufficientComb",
    "IntegrationConfig",
    "IntegrationDiverged",
    "LinearSteadyState",
    "LyapunovResult",
    "ModeState",
    "PhysicalParams",
    "PlateauResult",
    "ScaledParams",
    "Spectrum",
    "StepUnderflow",
    "SweepResult",
    "SweepRow",
    "SweepSpec",
    "Trajectory",
    "analyze_comb",
    "classify_regime",
    "compute_rabi",
    "cross_check",
    "default_params",
    "detect_teeth",
    "estimate_anchor",
    "estimate_repetition",
    "export_comb",
    "export_contour",
    "export_manifest",
    "export_spectrum",
    "export_sweep",
    "export_trajectory",
    "gamma_star",
    "integrate",
    "kittel_frequency",
    "linear_steady_state",
    "load_trajectory_csv",
    "lyapunov_largest",
    "measure_plateau_cutoff",
    "power_spectrum",
    "rhs",
    "rk4_step",
    "run_sweep",
    "spectral_flatness",
    "steady_magnon_number",
    "sweep_point",
]
