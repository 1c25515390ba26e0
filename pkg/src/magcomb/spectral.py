"""Power spectra and comb metrics for magnon time series.

The magnon record is complex (rotating-frame amplitude), so the spectrum
is two-sided.  Frequencies are reported in units of the mechanical
frequency as the offset from the drive: a signal component
``exp(+i * nu * t)`` in scaled time lands on the axis at ``nu``.

A comb shows up as lines at ``anchor + n * repetition`` for integer
``n``: the repetition always locks to the mechanical frequency, but the
whole comb can ride at a small common offset (``anchor``) set by the
static nonlinear frequency shift, so the detector estimates the anchor
from the strongest line before indexing teeth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientComb
from .integrator import Trajectory

WINDOWS = ("hann", "rect", "hamming", "blackman")

#: teeth are picked as the maximum bin within this many bins of the
#: predicted position
TOOTH_WINDOW_BINS = 2
#: bins masked around every predicted tooth position when computing the
#: local off-tooth floor and the residual flatness
GUARD_BINS = 5
#: default dynamic range: teeth more than this many decades below the
#: strongest tooth do not count as comb lines (they are real sidebands,
#: but sit outside any plausible measurement floor)
DEFAULT_FLOOR_DECADES = 4.0

_TINY = 1e-300


def _window(name: str, n: int) -> np.ndarray:
    if name == "hann":
        return np.hanning(n)
    if name == "rect":
        return np.ones(n)
    if name == "hamming":
        return np.hamming(n)
    if name == "blackman":
        return np.blackman(n)
    raise ValueError(f"unknown window {name!r}; choose from {WINDOWS}")


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Two-sided power spectrum on a uniform frequency grid.

    ``freqs`` ascend strictly with spacing ``bin_width`` (mechanical-
    frequency units); ``power`` is normalized so that its sum equals the
    mean square of the windowed signal (Parseval).
    """

    freqs: np.ndarray
    power: np.ndarray
    window: str
    bin_width: float

    @property
    def log_power(self) -> np.ndarray:
        return np.log10(np.maximum(self.power, _TINY))

    @property
    def n_bins(self) -> int:
        return len(self.freqs)


@dataclass(frozen=True, slots=True)
class CombTooth:
    """One comb line.

    ``amplitude`` is log10 of the bin power; ``prominence`` is the height
    in decades above the local median off-tooth floor (infinite when the
    floor is numerically zero).
    """

    order: int
    freq: float
    amplitude: float
    prominence: float


@dataclass(frozen=True, slots=True)
class PlateauResult:
    """Plateau / cutoff structure of one comb side (reported side chosen
    by longer plateau; orders are magnitudes)."""

    first_order: int
    last_order: int
    median_amplitude: float


@dataclass(frozen=True, eq=False)
class CombAnalysis:
    """Extracted comb metrics for one spectrum.

    ``teeth`` holds the comb lines that count toward ``line_count``:
    prominence at least the detection threshold and amplitude within the
    configured dynamic range of the strongest tooth.  ``anchor`` is the
    common offset of the comb from integer orders.
    """

    teeth: list[CombTooth]
    anchor: float
    repetition_rate: float
    line_count: int
    plateau: PlateauResult | None
    cutoff_order: int | None
    flatness: float
    nonperturbative_pairs: list[tuple[int, int]]

    def as_dict(self) -> dict:
        return {
            "anchor": self.anchor,
            "repetition_rate": self.repetition_rate,
            "line_count": self.line_count,
            "plateau": None if self.plateau is None else {
                "first_order": self.plateau.first_order,
                "last_order": self.plateau.last_order,
                "median_amplitude": self.plateau.median_amplitude,
            },
            "cutoff_order": self.cutoff_order,
            "flatness": self.flatness,
            "nonperturbative_pairs": [list(p) for p in self.nonperturbative_pairs],
            "teeth": [
                {"order": t.order, "freq": t.freq, "amplitude": t.amplitude,
                 "prominence": t.prominence}
                for t in self.teeth
            ],
        }


def power_spectrum(traj: Trajectory, window: str = "hann") -> Spectrum:
    """Windowed two-sided power spectrum of the magnon series.

    The record length must be a power of two (the trajectory builder
    guarantees this) and at least 1024 samples so comb structure around
    low orders is resolvable.
    """
    n = traj.n_samples
    if n < 1024 or (n & (n - 1)) != 0:
        raise ValueError(f"record length {n} is not a power of two >= 1024")
    w = _window(window, n)
    spec = np.fft.fft(traj.m * w)
    power = (spec.real**2 + spec.imag**2) / float(n) ** 2
    freqs = 2.0 * np.pi * np.fft.fftfreq(n, d=traj.dt_sample)
    freqs = np.fft.fftshift(freqs)
    power = np.fft.fftshift(power)
    return Spectrum(freqs=freqs, power=power, window=window,
                    bin_width=float(freqs[1] - freqs[0]))


def estimate_anchor(spec: Spectrum, rep_guess: float = 1.0) -> float:
    """Common comb offset: fractional part (mod repetition) of the
    strongest bin's frequency, folded into [-rep/2, rep/2)."""
    f_peak = float(spec.freqs[int(np.argmax(spec.power))])
    return (f_peak + 0.5 * rep_guess) % rep_guess - 0.5 * rep_guess


def _tooth_mask(n_bins: int, centers: np.ndarray, guard: int) -> np.ndarray:
    mask = np.zeros(n_bins, dtype=bool)
    for c in centers:
        mask[max(0, c - guard):c + guard + 1] = True
    return mask


def detect_teeth(
    spec: Spectrum,
    rep_guess: float = 1.0,
    prominence_db: float = 1.0,
    anchor: float | None = None,
) -> list[CombTooth]:
    """Find comb lines at ``anchor + n * rep_guess`` for integer n.

    Each candidate is the maximum bin within +-2 bins of its predicted
    position; it is kept when its power exceeds the local median floor
    (off-tooth bins within half a repetition) by ``prominence_db``
    decades.  An empty list is a valid result.
    """
    if rep_guess <= 2.0 * spec.bin_width:
        raise ValueError("rep_guess must exceed two frequency bins")
    if anchor is None:
        anchor = estimate_anchor(spec, rep_guess)
    freqs, power = spec.freqs, spec.power
    binw = spec.bin_width
    n_bins = len(power)
    half = int(round(0.5 * rep_guess / binw))
    n_lo = int(math.ceil((freqs[0] + 2 * binw - anchor) / rep_guess))
    n_hi = int(math.floor((freqs[-1] - 2 * binw - anchor) / rep_guess))
    centers = np.array(
        [int(round((anchor + n * rep_guess - freqs[0]) / binw)) for n in range(n_lo, n_hi + 1)]
    )
    near_tooth = _tooth_mask(n_bins, centers, GUARD_BINS)
    teeth = []
    for n_ord, c in zip(range(n_lo, n_hi + 1), centers):
        lo, hi = c - TOOTH_WINDOW_BINS, c + TOOTH_WINDOW_BINS + 1
        if lo < 0 or hi > n_bins:
            continue
        sl = power[lo:hi]
        pk = float(sl.max())
        if pk <= 0.0:
            continue
        wlo, whi = max(0, c - half), min(n_bins, c + half)
        off = power[wlo:whi][~near_tooth[wlo:whi]]
        floor = float(np.median(off)) if off.size else 0.0
        prominence = math.inf if floor <= 0.0 else math.log10(pk / floor)
        if prominence >= prominence_db:
            teeth.append(CombTooth(
                order=n_ord,
                freq=float(freqs[lo + int(np.argmax(sl))]),
                amplitude=math.log10(pk),
                prominence=prominence,
            ))
    return teeth


def estimate_repetition(teeth: list[CombTooth]) -> float:
    """Median spacing of consecutive detected teeth (repetition rate)."""
    if len(teeth) < 3:
        raise InsufficientComb(f"need at least 3 teeth, got {len(teeth)}")
    freqs = np.sort(np.array([t.freq for t in teeth]))
    return float(np.median(np.diff(freqs)))


def _longest_flat_run(orders: np.ndarray, amps: np.ndarray, band: float):
    """Longest run of consecutive orders with all amplitudes within
    +-band of the run median; returns (i, j, median) or None."""
    best = None
    n = len(orders)
    for i in range(n):
        for j in range(i + 4, n):
            if orders[j] - orders[i] != j - i:
                break
            w = amps[i:j + 1]
            med = float(np.median(w))
            if np.max(np.abs(w - med)) <= band:
                if best is None or (j - i) > (best[1] - best[0]):
                    best = (i, j, med)
    return best


def measure_plateau_cutoff(
    teeth: list[CombTooth],
    band_decades: float = 0.5,
    cutoff_drop_decades: float = 2.0,
) -> tuple[PlateauResult | None, int | None, list[tuple[int, int]]]:
    """Plateau, cutoff, and non-perturbative pairs from a tooth list.

    Each spectral side is analyzed separately on order magnitudes; the
    side with the longer plateau is reported.  The plateau is the longest
    run of consecutive orders whose amplitudes stay within
    ``+-band_decades`` of the run median (length >= 5); the cutoff is the
    smallest order past the plateau whose amplitude has dropped at least
    ``cutoff_drop_decades`` below the plateau median for good.  A missing
    plateau is a valid outcome, not an error.
    """
    best = None
    for sign in (1, -1):
        side = sorted((sign * t.order, t.amplitude) for t in teeth if sign * t.order > 0)
        if len(side) < 5:
            continue
        orders = np.array([s[0] for s in side])
        amps = np.array([s[1] for s in side])
        run = _longest_flat_run(orders, amps, band_decades)
        if run is None:
            continue
        if best is None or (run[1] - run[0]) > (best[0][1] - best[0][0]):
            best = (run, orders, amps)
    if best is None:
        return None, None, []
    (i, j, med), orders, amps = best
    plateau = PlateauResult(first_order=int(orders[i]), last_order=int(orders[j]),
                            median_amplitude=med)
    cutoff = None
    beyond = np.arange(j + 1, len(orders))
    if beyond.size == 0:
        cutoff = plateau.last_order + 1
    else:
        below = amps[beyond] <= med - cutoff_drop_decades
        # suffix of teeth that stay below for good
        stay = np.logical_and.accumulate(below[::-1])[::-1]
        idx = np.nonzero(stay)[0]
        if idx.size:
            cutoff = int(orders[beyond[idx[0]]])
    pairs = []
    for k in range(i, j):
        if orders[k + 1] == orders[k] + 1 and amps[k + 1] > amps[k]:
            pairs.append((int(orders[k]), int(orders[k + 1])))
    return plateau, cutoff, pairs


def spectral_flatness(
    spec: Spectrum,
    exclude_teeth: list[CombTooth] | None = None,
    guard_bins: int = GUARD_BINS,
) -> float:
    """Geometric-to-arithmetic mean ratio of off-tooth bin power.

    Near zero for a line spectrum over a quiet floor, approaching one for
    broadband disorder.  A dead (all-zero) spectrum reports 0.  Raises if
    the exclusions leave no bins.
    """
    keep = np.ones(spec.n_bins, dtype=bool)
    for t in exclude_teeth or []:
        c = int(round((t.freq - spec.freqs[0]) / spec.bin_width))
        keep[max(0, c - guard_bins):c + guard_bins + 1] = False
    if not np.any(keep):
        raise ValueError("all bins excluded")
    p = spec.power[keep]
    am = float(np.mean(p))
    if am <= 0.0:
        return 0.0
    gm = float(np.exp(np.mean(np.log(p + _TINY))))
    return min(gm / am, 1.0)


def analyze_comb(
    spec: Spectrum,
    rep_guess: float = 1.0,
    prominence_db: float = 1.0,
    band_decades: float = 0.5,
    floor_decades: float = DEFAULT_FLOOR_DECADES,
) -> CombAnalysis:
    """Full comb pipeline: teeth, repetition, plateau/cutoff, flatness.

    ``line_count`` counts teeth that clear the prominence threshold and
    sit within ``floor_decades`` of the strongest tooth; the flatness
    excludes both the detected comb and its mirror image (quasi-periodic
    states carry a symmetric partner family that is comb structure, not
    broadband disorder).
    """
    anchor = estimate_anchor(spec, rep_guess)
    detected = detect_teeth(spec, rep_guess, prominence_db, anchor=anchor)
    if detected:
        a_max = max(t.amplitude for t in detected)
        teeth = [t for t in detected if t.amplitude >= a_max - floor_decades]
    else:
        teeth = []
    try:
        repetition = estimate_repetition(teeth)
    except InsufficientComb:
        repetition = math.nan
    plateau, cutoff, pairs = measure_plateau_cutoff(teeth, band_decades)
    mirrored = [CombTooth(order=-t.order, freq=-t.freq, amplitude=t.amplitude,
                          prominence=t.prominence) for t in detected]
    flatness = spectral_flatness(spec, detected + mirrored)
    return CombAnalysis(
        teeth=teeth,
        anchor=anchor,
        repetition_rate=repetition,
        line_count=len(teeth),
        plateau=plateau,
        cutoff_order=cutoff,
        flatness=flatness,
        nonperturbative_pairs=pairs,
    )


SPECTRUM_HEADER = "freq_over_omega_b,power,log10_power"


def export_spectrum(spec: Spectrum, path: str | Path) -> Path:
    """Write the spectrum CSV (schema: freq_over_omega_b,power,log10_power)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = np.column_stack([spec.freqs, spec.power, spec.log_power])
    np.savetxt(path, cols, delimiter=",", header=SPECTRUM_HEADER, comments="",
               fmt="%.17g")
    return path


def export_comb(analysis: CombAnalysis, path: str | Path) -> Path:
    """Write the comb metrics JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(analysis.as_dict(), indent=2, sort_keys=True) + "\n")
    return path
