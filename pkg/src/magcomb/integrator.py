"""Deterministic time integration with transient discard and uniform sampling.

Two steppers are available: a fixed-step classic RK4 (the default; bit
reproducible) and an adaptive Dormand-Prince 5(4) used mainly to
cross-check the fixed-step results.  All time quantities here are in
scaled units (``omega_b = 1``, mechanical period ``2*pi``).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import IntegrationDiverged, StepUnderflow
from .model import ModeState, ScaledParams, TWO_PI

METHOD_RK4 = "rk4"
METHOD_DP54 = "dp54"

#: default step: 1024 steps per mechanical period
DEFAULT_DT = TWO_PI / 1024
#: default record length: 2048 mechanical periods -> 2^21 samples at the
#: default step, giving a comb-line resolution of omega_b/2048 per bin and
#: a Nyquist band covering harmonic orders |n| <= 512
DEFAULT_RECORD_PERIODS = 2048


@dataclass(frozen=True, slots=True)
class IntegrationConfig:
    """Stepper configuration in scaled time.

    ``t_transient = None`` resolves to three mechanical ring-down times
    (``3 / kappa_b``) of the parameter set being integrated: the phonon is
    by far the slowest mode, so its ring-up to the attractor bounds the
    transient.
    """

    dt: float = DEFAULT_DT
    t_transient: float | None = None
    t_record: float = DEFAULT_RECORD_PERIODS * TWO_PI
    sample_stride: int = 1
    method: str = METHOD_RK4
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_record <= 0.0:
            raise ValueError("t_record must be positive")
        if self.t_transient is not None and self.t_transient < 0.0:
            raise ValueError("t_transient must be non-negative")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.method not in (METHOD_RK4, METHOD_DP54):
            raise ValueError(f"unknown method {self.method!r}")
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")

    def resolve_transient(self, p: ScaledParams) -> float:
        if self.t_transient is not None:
            return self.t_transient
        return 3.0 / p.kappa_b

    def n_samples(self) -> int:
        """Recorded sample count: floor(t_record / sample interval),
        truncated down to a power of two."""
        raw = int(math.floor(self.t_record / (self.dt * self.sample_stride)))
        if raw < 2:
            raise ValueError("t_record shorter than two sample intervals")
        return 1 << (raw.bit_length() - 1)

    def with_method(self, method: str) -> "IntegrationConfig":
        return replace(self, method=method)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled time series of the three mode amplitudes.

    ``samples`` has shape (n, 3) complex128 with columns (a, m, b);
    sample k was taken at ``t0 + k * dt_sample``.
    """

    t0: float
    dt_sample: float
    samples: np.ndarray
    params_digest: str

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] != 3:
            raise ValueError("samples must have shape (n, 3)")
        if self.samples.shape[0] < 2:
            raise ValueError("a trajectory needs at least two samples")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(self.n_samples)

    @property
    def a(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def m(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def b(self) -> np.ndarray:
        return self.samples[:, 2]

    def state(self, k: int) -> ModeState:
        return ModeState.from_array(self.samples[k])

    def magnon_number(self) -> np.ndarray:
        """|m(t)|^2 for every sample."""
        return np.abs(self.m) ** 2


def params_digest(p: ScaledParams, cfg: IntegrationConfig, initial: ModeState) -> str:
    """Reproducibility fingerprint of everything that determines a run."""
    payload = {
        "params": [repr(float(x)) for x in p.as_array()],
        "n_spin": repr(float(p.n_spin)),
        "omega_b_si": repr(float(p.omega_b_si)),
        "dt": repr(cfg.dt),
        "t_transient": None if cfg.t_transient is None else repr(cfg.t_transient),
        "t_record": repr(cfg.t_record),
        "sample_stride": cfg.sample_stride,
        "method": cfg.method,
        "rel_tol": repr(cfg.rel_tol),
        "abs_tol": repr(cfg.abs_tol),
        "initial": [repr(float(v)) for v in initial.as_array().view(np.float64)],
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def rk4_step(state: ModeState, p: ScaledParams, dt: float) -> ModeState:
    """One fixed RK4 step; pure and deterministic.

    Raises IntegrationDiverged if the step produces a non-finite state.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    a, m, b = _kernels.rk4_step_c(state.a, state.m, state.b, p.as_array(), dt)
    out = ModeState(a=a, m=m, b=b)
    if not out.finite:
        raise IntegrationDiverged(step=0, time=dt)
    return out


def integrate(
    p: ScaledParams,
    cfg: IntegrationConfig | None = None,
    initial: ModeState = ModeState(),
) -> Trajectory:
    """Advance through the transient without recording, then record.

    The default initial state is the unexcited vacuum (all three modes
    zero).  With the fixed-step method, identical inputs give bit-identical
    trajectories.

    Raises
    ------
    IntegrationDiverged
        If any state component becomes non-finite; the exception carries
        the step index and scaled time of the failure.
    StepUnderflow
        If the adaptive method cannot meet its tolerance.
    """
    cfg = cfg or IntegrationConfig()
    parr = p.as_array()
    t_trans = cfg.resolve_transient(p)
    n_trans = int(math.ceil(t_trans / cfg.dt))
    n = cfg.n_samples()
    out = np.empty((n, 3), dtype=np.complex128)
    a, m, b = initial.a, initial.m, initial.b

    if cfg.method == METHOD_RK4:
        a, m, b, fail = _kernels.rk4_advance(a, m, b, parr, cfg.dt, n_trans)
        if fail != _kernels.OK:
            raise IntegrationDiverged(step=fail, time=fail * cfg.dt)
        a, m, b, fail = _kernels.rk4_record(a, m, b, parr, cfg.dt, cfg.sample_stride, out)
        if fail != _kernels.OK:
            raise IntegrationDiverged(step=n_trans + fail, time=(n_trans + fail) * cfg.dt)
    else:
        h0 = cfg.dt
        h_min = cfg.dt * 1e-10
        a, m, b, status, t_reached, h_last = _kernels.dp54_span(
            a, m, b, parr, t_trans, cfg.rel_tol, cfg.abs_tol, h0, h_min
        )
        if status == _kernels.DP_STATUS_UNDERFLOW:
            raise StepUnderflow(time=t_reached)
        if not ModeState(a, m, b).finite:
            raise IntegrationDiverged(step=-1, time=t_reached)
        dt_sample = cfg.dt * cfg.sample_stride
        a, m, b, status, k_fail = _kernels.dp54_record(
            a, m, b, parr, dt_sample, cfg.rel_tol, cfg.abs_tol, min(h_last, dt_sample),
            h_min, out
        )
        if status == _kernels.DP_STATUS_UNDERFLOW:
            raise StepUnderflow(time=t_trans + k_fail * dt_sample)
        if status == _kernels.DP_STATUS_DIVERGED:
            raise IntegrationDiverged(step=k_fail, time=t_trans + k_fail * dt_sample)

    return Trajectory(
        t0=n_trans * cfg.dt,
        dt_sample=cfg.dt * cfg.sample_stride,
        samples=out,
        params_digest=params_digest(p, cfg, initial),
    )


@dataclass(frozen=True, slots=True)
class CrossCheckReport:
    """Fixed-RK4 vs adaptive-DP54 agreement over a common horizon.

    ``max_rel_deviation`` is the largest pointwise state difference
    normalized by the largest state norm seen along the RK4 trajectory.
    In chaotic regimes the pointwise deviation grows exponentially by
    definition, so ``m2_rel_mismatch`` (relative difference of the
    time-averaged magnon numbers) is the quantity that must stay small.
    """

    max_rel_deviation: float
    mean_m2_rk4: float
    mean_m2_dp54: float
    m2_rel_mismatch: float
    flagged: bool | None = None


def cross_check(
    p: ScaledParams,
    cfg: IntegrationConfig | None = None,
    horizon: float | None = None,
    initial: ModeState = ModeState(),
    bound: float | None = None,
) -> CrossCheckReport:
    """Run both steppers on identical inputs and compare.

    The horizon defaults to 128 mechanical periods and no transient is
    discarded: the comparison starts exactly at ``initial``.  A ``bound``
    turns the report's ``flagged`` field on when the pointwise deviation
    exceeds it (a flag, never an exception).
    """
    cfg = cfg or IntegrationConfig()
    horizon = horizon if horizon is not None else 128 * TWO_PI
    base = replace(cfg, t_transient=0.0, t_record=horizon)
    traj_rk4 = integrate(p, base.with_method(METHOD_RK4), initial)
    traj_dp54 = integrate(p, base.with_method(METHOD_DP54), initial)
    diff = traj_rk4.samples - traj_dp54.samples
    dev = np.sqrt(np.sum(np.abs(diff) ** 2, axis=1))
    scale = float(np.max(np.sqrt(np.sum(np.abs(traj_rk4.samples) ** 2, axis=1))))
    max_rel = float(np.max(dev) / scale) if scale > 0.0 else 0.0
    m2_rk4 = float(np.mean(traj_rk4.magnon_number()))
    m2_dp54 = float(np.mean(traj_dp54.magnon_number()))
    ref = max(abs(m2_rk4), abs(m2_dp54))
    mismatch = abs(m2_rk4 - m2_dp54) / ref if ref > 0.0 else 0.0
    return CrossCheckReport(
        max_rel_deviation=max_rel,
        mean_m2_rk4=m2_rk4,
        mean_m2_dp54=m2_dp54,
        m2_rel_mismatch=float(mismatch),
        flagged=None if bound is None else bool(max_rel > bound),
    )


TRAJECTORY_HEADER = "t,re_a,im_a,re_m,im_m,re_b,im_b"


def export_trajectory(
    traj: Trajectory,
    out_dir: str | Path,
    basename: str = "trajectory",
    metadata: dict | None = None,
) -> tuple[Path, Path]:
    """Write the trajectory CSV and its JSON metadata sidecar.

    The CSV schema is ``t,re_a,im_a,re_m,im_m,re_b,im_b`` in scaled units.
    Returns the two paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{basename}.csv"
    meta_path = out_dir / f"{basename}.meta.json"
    cols = np.empty((traj.n_samples, 7), dtype=np.float64)
    cols[:, 0] = traj.times
    cols[:, 1] = traj.a.real
    cols[:, 2] = traj.a.imag
    cols[:, 3] = traj.m.real
    cols[:, 4] = traj.m.imag
    cols[:, 5] = traj.b.real
    cols[:, 6] = traj.b.imag
    np.savetxt(csv_path, cols, delimiter=",", header=TRAJECTORY_HEADER, comments="",
               fmt="%.17g")
    meta = {
        "t0": traj.t0,
        "dt_sample": traj.dt_sample,
        "n_samples": traj.n_samples,
        "params_digest": traj.params_digest,
    }
    if metadata:
        meta.update(metadata)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def load_trajectory_csv(csv_path: str | Path) -> Trajectory:
    """Read a trajectory written by export_trajectory."""
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    if data.ndim == 1:
        data = data[None, :]
    samples = np.empty((data.shape[0], 3), dtype=np.complex128)
    samples[:, 0] = data[:, 1] + 1j * data[:, 2]
    samples[:, 1] = data[:, 3] + 1j * data[:, 4]
    samples[:, 2] = data[:, 5] + 1j * data[:, 6]
    t = data[:, 0]
    dt_sample = float(t[1] - t[0]) if len(t) > 1 else 0.0
    return Trajectory(t0=float(t[0]), dt_sample=dt_sample, samples=samples,
                      params_digest="loaded")
