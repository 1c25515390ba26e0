"""Higher-level experiments: parameter sweeps, steady magnon number,
largest Lyapunov exponent, regime classification.

Sweep points are independent and may run in a process pool; results are
slotted back by grid index, so the output is byte-identical for any
worker count.  A point whose integration diverges produces a ``diverged``
row instead of aborting the sweep (sweeps deliberately cross instability
boundaries).
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import IntegrationDiverged, StepUnderflow
from .integrator import IntegrationConfig, Trajectory, integrate
from .model import ModeState, PhysicalParams, ScaledParams, TWO_PI
from .spectral import CombAnalysis, DEFAULT_FLOOR_DECADES, analyze_comb, power_spectrum

REGIME_BELOW = "below-threshold"
REGIME_COMB = "comb"
REGIME_CHAOTIC = "chaotic"
REGIME_DIVERGED = "diverged"

#: default dissipative-coupling grid, in units of omega_b
DEFAULT_GRID = (0.0, 0.5, 0.8, 1.0, 1.3, 2.0, 3.0)

#: Lyapunov defaults: 16-period renormalization windows keep the
#: finite-window sampling bias of quasi-periodic states well below the
#: physical decay rates; 192 windows give a usable tail standard error.
DEFAULT_RENORM_INTERVAL = 16 * TWO_PI
DEFAULT_N_WINDOWS = 192
DEFAULT_PERTURBATION = 1e-6


def steady_magnon_number(traj: Trajectory, tail_fraction: float = 0.25) -> float:
    """Time average of |m|^2 over the final ``tail_fraction`` of the record."""
    if not 0.0 < tail_fraction <= 0.5:
        raise ValueError("tail_fraction must be in (0, 0.5]")
    n_tail = max(1, int(round(traj.n_samples * tail_fraction)))
    return float(np.mean(traj.magnon_number()[-n_tail:]))


@dataclass(frozen=True, eq=False)
class LyapunovResult:
    """Largest-exponent estimate with its convergence history.

    ``lambda_max`` (1/scaled-time) is the mean of the last half of the
    per-window history; ``stderr`` is the standard error of that tail.
    """

    lambda_max: float
    history: np.ndarray
    renorm_interval: float
    perturbation_norm: float

    @property
    def tail(self) -> np.ndarray:
        return self.history[len(self.history) // 2:]

    @property
    def stderr(self) -> float:
        t = self.tail
        return float(np.std(t) / math.sqrt(len(t)))


def lyapunov_largest(
    p: ScaledParams,
    cfg: IntegrationConfig | None = None,
    renorm_interval: float = DEFAULT_RENORM_INTERVAL,
    perturbation_norm: float = DEFAULT_PERTURBATION,
    n_windows: int = DEFAULT_N_WINDOWS,
    direction: ModeState | None = None,
    initial: ModeState | None = None,
) -> LyapunovResult:
    """Two-trajectory (Benettin) largest Lyapunov exponent.

    When ``initial`` is None the transient from the zero state is
    integrated first (per ``cfg``) so estimation starts on the attractor;
    pass a known on-attractor state to skip that.  ``perturbation_norm``
    is relative to the state norm.  ``direction`` restricts the initial
    displacement (default: equal weight on all six real components);
    the renormalized direction is free to rotate afterwards.

    Always uses the fixed-step RK4 map, so results are bit-reproducible.
    """
    cfg = cfg or IntegrationConfig()
    if n_windows < 100:
        raise ValueError("n_windows must be >= 100 (convergence history)")
    if perturbation_norm <= 0.0:
        raise ValueError("perturbation_norm must be positive")
    parr = p.as_array()
    if initial is None:
        t_trans = cfg.resolve_transient(p)
        n_trans = int(math.ceil(t_trans / cfg.dt))
        a, m, b, fail = _kernels.rk4_advance(0j, 0j, 0j, parr, cfg.dt, n_trans)
        if fail != _kernels.OK:
            raise IntegrationDiverged(step=fail, time=fail * cfg.dt)
        initial = ModeState(a=a, m=m, b=b)
    d = direction or ModeState(a=1.0 + 1.0j, m=1.0 + 1.0j, b=1.0 + 1.0j)
    if d.norm() == 0.0:
        raise ValueError("direction must be nonzero")
    eps = perturbation_norm * max(initial.norm(), 1.0)
    steps_per_window = max(1, int(round(renorm_interval / cfg.dt)))
    hist, status = _kernels.benettin(
        initial.a, initial.m, initial.b, d.a, d.m, d.b,
        parr, cfg.dt, steps_per_window, n_windows, eps,
    )
    if status != _kernels.OK:
        raise IntegrationDiverged(step=status * steps_per_window,
                                  time=status * steps_per_window * cfg.dt)
    tail = hist[n_windows // 2:]
    return LyapunovResult(
        lambda_max=float(np.mean(tail)),
        history=hist,
        renorm_interval=steps_per_window * cfg.dt,
        perturbation_norm=eps,
    )


def classify_regime(
    line_count: int,
    flatness: float,
    lyapunov: float | None = None,
    lyapunov_se: float = 0.0,
    diverged: bool = False,
    flatness_chaos: float = 0.3,
    comb_min_lines: int = 5,
) -> str:
    """Label one sweep point.

    A positive exponent counts as chaos only beyond twice its standard
    error (the estimator hovers around zero on quasi-periodic attractors);
    with the default ``lyapunov_se = 0`` any positive value is chaotic.
    """
    if diverged:
        return REGIME_DIVERGED
    if lyapunov is not None and lyapunov > 2.0 * lyapunov_se:
        return REGIME_CHAOTIC
    if flatness > flatness_chaos:
        return REGIME_CHAOTIC
    if line_count >= comb_min_lines:
        return REGIME_COMB
    return REGIME_BELOW


@dataclass(frozen=True, slots=True)
class SweepSpec:
    """One-parameter sweep specification.

    ``grid`` values are in units of omega_b and are applied to the scaled
    parameter named by ``parameter`` (default the dissipative coupling).
    Analysis thresholds ride along so a sweep is fully reproducible from
    its spec.
    """

    base: PhysicalParams = field(default_factory=PhysicalParams)
    parameter: str = "j_am"
    grid: tuple[float, ...] = DEFAULT_GRID
    config: IntegrationConfig = field(default_factory=IntegrationConfig)
    prominence_db: float = 1.0
    band_decades: float = 0.5
    floor_decades: float = DEFAULT_FLOOR_DECADES
    tail_fraction: float = 0.25
    flatness_chaos: float = 0.3
    comb_min_lines: int = 5
    with_lyapunov: bool = True
    renorm_interval: float = DEFAULT_RENORM_INTERVAL
    n_windows: int = DEFAULT_N_WINDOWS
    perturbation_norm: float = DEFAULT_PERTURBATION
    contour_decimation: int = 128

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0 or not np.all(np.isfinite(g)):
            raise ValueError("grid must be nonempty and finite")
        if np.any(np.diff(g) < 0):
            raise ValueError("grid must be sorted ascending")
        if not hasattr(ScaledParams, self.parameter):
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")

    def scaled_at(self, value: float) -> ScaledParams:
        return replace(self.base.scaled(), **{self.parameter: value})


@dataclass(frozen=True, slots=True)
class SweepRow:
    """Per-point summary metrics.

    ``lyapunov`` is in 1/s (scaled estimate times omega_b);
    ``excitation_ratio`` is max |m|^2 / (2 n_spin), the monitored validity
    diagnostic of the single-boson spin description.
    """

    j_am: float
    steady_magnon_number: float
    line_count: int
    plateau_lo: int | None
    plateau_hi: int | None
    cutoff_order: int | None
    flatness: float
    lyapunov: float | None
    lyapunov_se: float | None
    regime: str
    excitation_ratio: float
    repetition_rate: float
    anchor: float


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: list[SweepRow]
    contour_freqs: np.ndarray
    contour: np.ndarray  # shape (len(grid), len(contour_freqs)); NaN rows for diverged


def _diverged_row(value: float) -> SweepRow:
    return SweepRow(
        j_am=value,
        steady_magnon_number=math.nan,
        line_count=0,
        plateau_lo=None,
        plateau_hi=None,
        cutoff_order=None,
        flatness=math.nan,
        lyapunov=None,
        lyapunov_se=None,
        regime=REGIME_DIVERGED,
        excitation_ratio=math.nan,
        repetition_rate=math.nan,
        anchor=math.nan,
    )


def _decimate_log_power(spec, decimation: int) -> tuple[np.ndarray, np.ndarray]:
    """Block-maximum decimation of log10 power (keeps comb lines visible)."""
    n = spec.n_bins - spec.n_bins % decimation
    lp = spec.log_power[:n].reshape(-1, decimation)
    fr = spec.freqs[:n].reshape(-1, decimation)
    return fr.mean(axis=1), lp.max(axis=1)


def sweep_point(spec: SweepSpec, value: float) -> tuple[SweepRow, np.ndarray, np.ndarray]:
    """Full pipeline for one grid point: integrate, spectrum, comb
    metrics, optional Lyapunov.  Returns (row, contour_freqs, contour)."""
    p = spec.scaled_at(value)
    n_contour = spec.config.n_samples() // spec.contour_decimation
    try:
        traj = integrate(p, spec.config)
    except (IntegrationDiverged, StepUnderflow):
        return (_diverged_row(value), np.full(n_contour, math.nan),
                np.full(n_contour, math.nan))
    spectrum = power_spectrum(traj)
    comb = analyze_comb(
        spectrum,
        prominence_db=spec.prominence_db,
        band_decades=spec.band_decades,
        floor_decades=spec.floor_decades,
    )
    m2 = steady_magnon_number(traj, spec.tail_fraction)
    excitation = float(np.max(traj.magnon_number()) / (2.0 * p.n_spin))
    lam_si = se_si = None
    lam = None
    se = 0.0
    if spec.with_lyapunov:
        lyap = lyapunov_largest(
            p,
            spec.config,
            renorm_interval=spec.renorm_interval,
            perturbation_norm=spec.perturbation_norm,
            n_windows=spec.n_windows,
            initial=traj.state(traj.n_samples - 1),
        )
        lam, se = lyap.lambda_max, lyap.stderr
        lam_si = lam * p.omega_b_si
        se_si = se * p.omega_b_si
    regime = classify_regime(
        comb.line_count,
        comb.flatness,
        lyapunov=lam,
        lyapunov_se=se,
        flatness_chaos=spec.flatness_chaos,
        comb_min_lines=spec.comb_min_lines,
    )
    row = SweepRow(
        j_am=value,
        steady_magnon_number=m2,
        line_count=comb.line_count,
        plateau_lo=None if comb.plateau is None else comb.plateau.first_order,
        plateau_hi=None if comb.plateau is None else comb.plateau.last_order,
        cutoff_order=comb.cutoff_order,
        flatness=comb.flatness,
        lyapunov=lam_si,
        lyapunov_se=se_si,
        regime=regime,
        excitation_ratio=excitation,
        repetition_rate=comb.repetition_rate,
        anchor=comb.anchor,
    )
    cf, cp = _decimate_log_power(spectrum, spec.contour_decimation)
    return row, cf, cp


def _sweep_point_args(args) -> tuple[SweepRow, np.ndarray, np.ndarray]:
    return sweep_point(*args)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Execute the sweep; output order always matches grid order.

    ``workers > 1`` runs points in separate processes; per-point results
    are deterministic, so worker count never changes the output.
    """
    tasks = [(spec, float(v)) for v in spec.grid]
    if workers <= 1:
        results = [sweep_point(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point_args, tasks))
    rows = [r[0] for r in results]
    freqs = next((r[1] for r in results if np.all(np.isfinite(r[1]))), results[0][1])
    contour = np.vstack([r[2] for r in results])
    return SweepResult(rows=rows, contour_freqs=freqs, contour=contour)


SWEEP_HEADER = [
    "j_am_over_omega_b", "steady_m2", "line_count", "plateau_lo", "plateau_hi",
    "cutoff_order", "flatness", "lyapunov", "regime",
    "lyapunov_se", "excitation_ratio", "repetition_rate", "anchor",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def export_sweep(rows: list[SweepRow], path: str | Path) -> Path:
    """Write sweep rows as CSV (leading columns follow the documented
    schema; diagnostic columns are appended after ``regime``)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([
                _fmt(r.j_am), _fmt(r.steady_magnon_number), r.line_count,
                _fmt(r.plateau_lo), _fmt(r.plateau_hi), _fmt(r.cutoff_order),
                _fmt(r.flatness), _fmt(r.lyapunov), r.regime,
                _fmt(r.lyapunov_se), _fmt(r.excitation_ratio),
                _fmt(r.repetition_rate), _fmt(r.anchor),
            ])
    return path


def export_contour(result: SweepResult, path: str | Path) -> Path:
    """Matrix of decimated log10 power vs (grid value, frequency), CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j_am_over_omega_b"] + [repr(float(f)) for f in result.contour_freqs])
        for row, spec_row in zip(result.rows, result.contour):
            w.writerow([repr(row.j_am)] + [repr(float(v)) for v in spec_row])
    return path


def export_manifest(spec: SweepSpec, rows: list[SweepRow], path: str | Path) -> Path:
    """JSON manifest: full sweep spec plus per-row regime summary."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "parameter": spec.parameter,
        "grid": list(spec.grid),
        "scaled_base": {k: getattr(spec.base.scaled(), k)
                        for k in ("delta_a", "delta_m", "kappa_a", "kappa_m", "kappa_b",
                                  "g_mb", "j_am", "g_coh", "drive_omega", "n_spin")},
        "config": {
            "dt": spec.config.dt,
            "t_transient": spec.config.t_transient,
            "t_record": spec.config.t_record,
            "sample_stride": spec.config.sample_stride,
            "method": spec.config.method,
        },
        "thresholds": {
            "prominence_db": spec.prominence_db,
            "band_decades": spec.band_decades,
            "floor_decades": spec.floor_decades,
            "tail_fraction": spec.tail_fraction,
            "flatness_chaos": spec.flatness_chaos,
            "comb_min_lines": spec.comb_min_lines,
        },
        "lyapunov": {
            "enabled": spec.with_lyapunov,
            "renorm_interval": spec.renorm_interval,
            "n_windows": spec.n_windows,
            "perturbation_norm": spec.perturbation_norm,
        },
        "regimes": [r.regime for r in rows],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
