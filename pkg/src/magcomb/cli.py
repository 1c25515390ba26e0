"""Command-line front end.

Four subcommands: ``simulate`` (trajectory files), ``spectrum`` (spectrum
CSV + comb JSON), ``sweep`` (rows CSV + contour matrix + manifest), and
``lyapunov`` (exponent JSON).

Configuration is JSON with explicit unit suffixes (``*_hz`` means a
frequency in Hz, i.e. omega/2pi; ``*_rad_per_s`` an angular rate), which
keeps the two conventions from ever being mixed up.  Every run emits a
``config.resolved.json`` with all defaults applied, in canonical units,
that reproduces the run exactly when fed back in.

Exit codes: 0 success, 2 usage/config error, 3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    DEFAULT_GRID,
    DEFAULT_N_WINDOWS,
    DEFAULT_PERTURBATION,
    DEFAULT_RENORM_INTERVAL,
    SweepSpec,
    export_contour,
    export_manifest,
    export_sweep,
    lyapunov_largest,
    run_sweep,
    steady_magnon_number,
)
from .errors import ConfigError, IntegrationDiverged, StepUnderflow
from .integrator import (
    IntegrationConfig,
    export_trajectory,
    integrate,
    load_trajectory_csv,
    params_digest,
)
from .model import (
    GYRO_YIG,
    ModeState,
    PhysicalParams,
    TWO_PI,
    compute_rabi,
    kittel_frequency,
)
from .spectral import analyze_comb, export_comb, export_spectrum, power_spectrum

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

_RATE_KEYS = ("omega_b", "omega_a", "omega_m", "omega_l", "kappa_a", "kappa_m",
              "kappa_b", "g_mb", "j_am", "g_coh", "drive_omega", "delta_a", "delta_m")


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Fully resolved run configuration."""

    params: PhysicalParams = field(default_factory=PhysicalParams)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    window: str = "hann"
    prominence_db: float = 1.0
    band_decades: float = 0.5
    floor_decades: float = 4.0
    tail_fraction: float = 0.25
    flatness_chaos: float = 0.3
    comb_min_lines: int = 5
    grid: tuple[float, ...] = DEFAULT_GRID
    parameter: str = "j_am"
    with_lyapunov: bool = True
    renorm_interval: float = DEFAULT_RENORM_INTERVAL
    n_windows: int = DEFAULT_N_WINDOWS
    perturbation_norm: float = DEFAULT_PERTURBATION
    contour_decimation: int = 128
    out_dir: str = "out"
    workers: int = 1
    seed: int = 0

    def sweep_spec(self) -> SweepSpec:
        return SweepSpec(
            base=self.params,
            parameter=self.parameter,
            grid=self.grid,
            config=self.integration,
            prominence_db=self.prominence_db,
            band_decades=self.band_decades,
            floor_decades=self.floor_decades,
            tail_fraction=self.tail_fraction,
            flatness_chaos=self.flatness_chaos,
            comb_min_lines=self.comb_min_lines,
            with_lyapunov=self.with_lyapunov,
            renorm_interval=self.renorm_interval,
            n_windows=self.n_windows,
            perturbation_norm=self.perturbation_norm,
            contour_decimation=self.contour_decimation,
        )


def _take_rate(section: dict, name: str) -> float | None:
    """Pop a rate given as <name>_hz or <name>_rad_per_s; reject both."""
    hz = section.pop(f"{name}_hz", None)
    rad = section.pop(f"{name}_rad_per_s", None)
    if hz is not None and rad is not None:
        raise ConfigError(f"give {name} as _hz or _rad_per_s, not both")
    if hz is not None:
        return TWO_PI * float(hz)
    if rad is not None:
        return float(rad)
    return None


def _build_params(section: dict) -> PhysicalParams:
    section = dict(section)
    rates = {k: _take_rate(section, k) for k in _RATE_KEYS}
    h_field = section.pop("h_field_tesla", None)
    b0 = section.pop("b0_tesla", None)
    n_spin = section.pop("n_spin", None)
    gyro_hz = section.pop("gyro_hz_per_tesla", None)
    gyro_rad = section.pop("gyro_rad_per_s_per_tesla", None)
    if section:
        raise ConfigError(f"unknown physical keys: {sorted(section)}")
    if gyro_hz is not None and gyro_rad is not None:
        raise ConfigError("give gyro as _hz_per_tesla or _rad_per_s_per_tesla, not both")
    gyro = TWO_PI * float(gyro_hz) if gyro_hz is not None else (
        float(gyro_rad) if gyro_rad is not None else GYRO_YIG)

    defaults = PhysicalParams()
    omega_b = rates["omega_b"] if rates["omega_b"] is not None else defaults.omega_b
    if h_field is not None and rates["omega_m"] is not None:
        raise ConfigError("give omega_m or h_field_tesla, not both")
    omega_m = (kittel_frequency(float(h_field), gyro) if h_field is not None
               else rates["omega_m"] if rates["omega_m"] is not None else defaults.omega_m)
    # detunings win over absolute frequencies when both routes are present
    if rates["delta_m"] is not None:
        omega_l = omega_m + rates["delta_m"]
    elif rates["omega_l"] is not None:
        omega_l = rates["omega_l"]
    else:
        omega_l = omega_m + omega_b
    if rates["delta_a"] is not None:
        omega_a = omega_l - rates["delta_a"]
    elif rates["omega_a"] is not None:
        omega_a = rates["omega_a"]
    else:
        omega_a = omega_l - omega_b

    n_spin = float(n_spin) if n_spin is not None else defaults.n_spin
    if rates["drive_omega"] is not None:
        drive = rates["drive_omega"]
        if b0 is not None:
            raise ConfigError("give drive_omega or b0_tesla, not both")
    else:
        drive = compute_rabi(float(b0) if b0 is not None else 3.5e-5, n_spin, gyro)

    return PhysicalParams(
        omega_b=omega_b,
        omega_a=omega_a,
        omega_m=omega_m,
        omega_l=omega_l,
        kappa_a=rates["kappa_a"] if rates["kappa_a"] is not None else defaults.kappa_a,
        kappa_m=rates["kappa_m"] if rates["kappa_m"] is not None else defaults.kappa_m,
        kappa_b=rates["kappa_b"] if rates["kappa_b"] is not None else defaults.kappa_b,
        g_mb=rates["g_mb"] if rates["g_mb"] is not None else defaults.g_mb,
        j_am=rates["j_am"] if rates["j_am"] is not None else 0.0,
        g_coh=rates["g_coh"] if rates["g_coh"] is not None else 0.0,
        drive_omega=drive,
        n_spin=n_spin,
    )


def _build_integration(section: dict, omega_b_scaled_kappa_b: float | None = None) -> IntegrationConfig:
    section = dict(section)
    spp = section.pop("steps_per_period", None)
    dt = section.pop("dt", None)
    if spp is not None and dt is not None:
        raise ConfigError("give steps_per_period or dt, not both")
    if spp is not None:
        dt = TWO_PI / int(spp)
    ringdowns = section.pop("transient_ringdowns", None)
    t_transient = section.pop("t_transient", None)
    if ringdowns is not None and t_transient is not None:
        raise ConfigError("give transient_ringdowns or t_transient, not both")
    periods = section.pop("record_periods", None)
    t_record = section.pop("t_record", None)
    if periods is not None and t_record is not None:
        raise ConfigError("give record_periods or t_record, not both")
    if periods is not None:
        t_record = periods * TWO_PI
    kwargs = {}
    if dt is not None:
        kwargs["dt"] = float(dt)
    if t_record is not None:
        kwargs["t_record"] = float(t_record)
    if t_transient is not None:
        kwargs["t_transient"] = float(t_transient)
    for key in ("sample_stride", "method", "rel_tol", "abs_tol"):
        if key in section:
            kwargs[key] = section.pop(key)
    if section:
        raise ConfigError(f"unknown integration keys: {sorted(section)}")
    cfg = IntegrationConfig(**kwargs)
    if ringdowns is not None:
        # needs kappa_b: resolved by the caller against the physical params
        if omega_b_scaled_kappa_b is None:
            raise ConfigError("transient_ringdowns needs physical parameters")
        cfg = replace(cfg, t_transient=float(ringdowns) / omega_b_scaled_kappa_b)
    return cfg


_SPECTRAL_KEYS = {"window", "prominence_db", "floor_decades", "band_decades"}
_ANALYSIS_KEYS = {"tail_fraction", "flatness_chaos", "comb_min_lines", "grid",
                  "parameter", "with_lyapunov", "renorm_periods", "n_windows",
                  "perturbation_norm", "contour_decimation"}
_RUN_KEYS = {"out_dir", "workers", "seed"}


def build_config(doc: dict) -> RunConfig:
    """Validate a config document and resolve every default."""
    doc = dict(doc)
    phys = doc.pop("physical", {})
    integ = doc.pop("integration", {})
    spect = doc.pop("spectral", {})
    anal = doc.pop("analysis", {})
    run = doc.pop("run", {})
    if doc:
        raise ConfigError(f"unknown top-level keys: {sorted(doc)}")
    for name, section, allowed in (("spectral", spect, _SPECTRAL_KEYS),
                                   ("analysis", anal, _ANALYSIS_KEYS),
                                   ("run", run, _RUN_KEYS)):
        unknown = set(section) - allowed
        if unknown:
            raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    try:
        params = _build_params(phys)
        scaled_kb = params.kappa_b / params.omega_b
        integration = _build_integration(integ, scaled_kb)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    kwargs = {}
    if "renorm_periods" in anal:
        kwargs["renorm_interval"] = float(anal.pop("renorm_periods")) * TWO_PI
    if "grid" in anal:
        kwargs["grid"] = tuple(float(v) for v in anal.pop("grid"))
    for key in list(anal):
        kwargs[key] = anal.pop(key)
    for key in list(spect):
        kwargs[key] = spect.pop(key)
    for key in list(run):
        kwargs[key] = run.pop(key)
    try:
        return RunConfig(params=params, integration=integration, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def resolved_doc(cfg: RunConfig) -> dict:
    """Canonical resolved config (reproduces the run when loaded back)."""
    p = cfg.params
    return {
        "physical": {
            "omega_b_rad_per_s": p.omega_b,
            "omega_a_rad_per_s": p.omega_a,
            "omega_m_rad_per_s": p.omega_m,
            "omega_l_rad_per_s": p.omega_l,
            "kappa_a_rad_per_s": p.kappa_a,
            "kappa_m_rad_per_s": p.kappa_m,
            "kappa_b_rad_per_s": p.kappa_b,
            "g_mb_rad_per_s": p.g_mb,
            "j_am_rad_per_s": p.j_am,
            "g_coh_rad_per_s": p.g_coh,
            "drive_omega_rad_per_s": p.drive_omega,
            "n_spin": p.n_spin,
        },
        "integration": {
            "dt": cfg.integration.dt,
            "t_transient": cfg.integration.resolve_transient(p.scaled()),
            "t_record": cfg.integration.t_record,
            "sample_stride": cfg.integration.sample_stride,
            "method": cfg.integration.method,
            "rel_tol": cfg.integration.rel_tol,
            "abs_tol": cfg.integration.abs_tol,
        },
        "spectral": {
            "window": cfg.window,
            "prominence_db": cfg.prominence_db,
            "floor_decades": cfg.floor_decades,
            "band_decades": cfg.band_decades,
        },
        "analysis": {
            "tail_fraction": cfg.tail_fraction,
            "flatness_chaos": cfg.flatness_chaos,
            "comb_min_lines": cfg.comb_min_lines,
            "grid": list(cfg.grid),
            "parameter": cfg.parameter,
            "with_lyapunov": cfg.with_lyapunov,
            "renorm_periods": cfg.renorm_interval / TWO_PI,
            "n_windows": cfg.n_windows,
            "perturbation_norm": cfg.perturbation_norm,
            "contour_decimation": cfg.contour_decimation,
        },
        "run": {"out_dir": cfg.out_dir, "workers": cfg.workers, "seed": cfg.seed},
    }


def _apply_overrides(doc: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object")
        node[parts[-1]] = value
    return doc


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    doc: dict = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
    _apply_overrides(doc, overrides)
    return build_config(doc)


def _emit_resolved(cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved.json").write_text(
        json.dumps(resolved_doc(cfg), indent=2, sort_keys=True) + "\n")


def _error_json(out_dir: Path, kind: str, message: str, **extra) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"error": kind, "message": message}
    payload.update(extra)
    (out_dir / "error.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> int:
    _emit_resolved(cfg, out_dir)
    scaled = cfg.params.scaled()
    try:
        traj = integrate(scaled, cfg.integration)
    except (IntegrationDiverged, StepUnderflow) as exc:
        _error_json(out_dir, "diverged", str(exc),
                    time=getattr(exc, "time", None))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    meta = {
        "steady_m2": steady_magnon_number(traj, cfg.tail_fraction),
        "excitation_ratio": float(np.max(traj.magnon_number()) / (2 * cfg.params.n_spin)),
        "omega_b_rad_per_s": cfg.params.omega_b,
        "j_am_over_omega_b": cfg.params.j_am / cfg.params.omega_b,
    }
    export_trajectory(traj, out_dir, metadata=meta)
    print(f"wrote {out_dir / 'trajectory.csv'} ({traj.n_samples} samples)")
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, out_dir: Path, trajectory: str | None) -> int:
    _emit_resolved(cfg, out_dir)
    if trajectory:
        try:
            traj = load_trajectory_csv(trajectory)
        except OSError as exc:
            print(f"error: cannot read {trajectory}: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        try:
            traj = integrate(cfg.params.scaled(), cfg.integration)
        except (IntegrationDiverged, StepUnderflow) as exc:
            _error_json(out_dir, "diverged", str(exc))
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
    n = traj.n_samples
    if n < 1024 or n & (n - 1):
        print(f"error: record length {n} is not a power of two >= 1024; "
              "adjust record_periods (or t_record) so the sample count truncates "
              "to a power of two", file=sys.stderr)
        return EXIT_USAGE
    spec = power_spectrum(traj, cfg.window)
    comb = analyze_comb(spec, prominence_db=cfg.prominence_db,
                        band_decades=cfg.band_decades,
                        floor_decades=cfg.floor_decades)
    export_spectrum(spec, out_dir / "spectrum.csv")
    export_comb(comb, out_dir / "comb.json")
    print(f"wrote {out_dir / 'spectrum.csv'}, {out_dir / 'comb.json'} "
          f"(lines={comb.line_count})")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out_dir: Path, grid: str | None, workers: int) -> int:
    if grid is not None:
        try:
            values = tuple(float(v) for v in grid.split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError(f"bad --grid: {exc}") from exc
        cfg = replace(cfg, grid=values)
    _emit_resolved(cfg, out_dir)
    result = run_sweep(cfg.sweep_spec(), workers=workers)
    export_sweep(result.rows, out_dir / "sweep.csv")
    export_contour(result, out_dir / "contour.csv")
    export_manifest(cfg.sweep_spec(), result.rows, out_dir / "manifest.json")
    n_div = sum(r.regime == "diverged" for r in result.rows)
    print(f"wrote {out_dir / 'sweep.csv'} ({len(result.rows)} rows, {n_div} diverged)")
    return EXIT_OK


def cmd_lyapunov(cfg: RunConfig, out_dir: Path) -> int:
    _emit_resolved(cfg, out_dir)
    scaled = cfg.params.scaled()
    try:
        res = lyapunov_largest(
            scaled, cfg.integration,
            renorm_interval=cfg.renorm_interval,
            perturbation_norm=cfg.perturbation_norm,
            n_windows=cfg.n_windows,
        )
    except (IntegrationDiverged, StepUnderflow) as exc:
        _error_json(out_dir, "diverged", str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    payload = {
        "lambda_max_per_scaled_time": res.lambda_max,
        "lambda_max_per_s": res.lambda_max * scaled.omega_b_si,
        "stderr_per_scaled_time": res.stderr,
        "renorm_interval": res.renorm_interval,
        "perturbation_norm": res.perturbation_norm,
        "history": res.history.tolist(),
        "params_digest": params_digest(scaled, cfg.integration, ModeState()),
    }
    (out_dir / "lyapunov.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_dir / 'lyapunov.json'} "
          f"(lambda = {res.lambda_max:+.4e} +- {res.stderr:.1e} per scaled time)")
    return EXIT_OK


def _defaults_epilog() -> str:
    p = PhysicalParams()
    lines = [
        "default physical parameters:",
        f"  omega_b/2pi = {p.omega_b / TWO_PI:.6g} Hz (mechanical mode)",
        f"  omega_m/2pi = {p.omega_m / TWO_PI:.6g} Hz, omega_a/2pi = {p.omega_a / TWO_PI:.6g} Hz",
        f"  omega_l/2pi = {p.omega_l / TWO_PI:.6g} Hz (detunings delta_a = delta_m = omega_b)",
        f"  kappa_a/2pi = {p.kappa_a / TWO_PI:.6g} Hz (calibrated: instability threshold at 0.43 omega_b)",
        f"  kappa_m/2pi = {p.kappa_m / TWO_PI:.6g} Hz, kappa_b/2pi = {p.kappa_b / TWO_PI:.6g} Hz",
        f"  g_mb/2pi = {p.g_mb / TWO_PI:.6g} Hz, j_am = 0 (set via config/--override)",
        f"  drive: B0 = 3.5e-05 T, n_spin = {p.n_spin:.3g}, gyro/2pi = 2.8e10 Hz/T "
        f"-> drive_omega/2pi = {p.drive_omega / TWO_PI:.6g} Hz",
        "default integration: 1024 steps/period, transient 3 mechanical ring-down",
        "  times (3/kappa_b), record 2048 periods (2^21 samples), fixed RK4",
        "default analysis: Hann window, prominence 1.0 decade, dynamic range 4.0",
        "  decades, plateau band 0.5 decade, tail fraction 0.25, grid "
        + ",".join(str(g) for g in DEFAULT_GRID),
    ]
    return "\n".join(lines)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magcomb",
        description=__doc__,
        epilog=_defaults_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config path (defaults apply when omitted)")
        sp.add_argument("--out", default=None, help="output directory (default: config run.out_dir)")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes for sweep points (default: config run.workers)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path config override, e.g. physical.j_am_rad_per_s=7.2e7")

    common(sub.add_parser("simulate", help="integrate and write trajectory CSV + metadata"))
    sp = sub.add_parser("spectrum", help="magnon power spectrum + comb metrics")
    common(sp)
    sp.add_argument("--trajectory", help="existing trajectory CSV (skips integration)")
    sp = sub.add_parser("sweep", help="parameter sweep: rows CSV, contour matrix, manifest")
    common(sp)
    sp.add_argument("--grid", help="comma-separated grid values in omega_b units")
    common(sub.add_parser("lyapunov", help="largest Lyapunov exponent estimate"))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out if args.out is not None else cfg.out_dir)
    workers = args.workers if getattr(args, "workers", None) is not None else cfg.workers
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, out_dir, args.trajectory)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, args.grid, workers)
        if args.command == "lyapunov":
            return cmd_lyapunov(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
