"""Physical parameters, unit scaling, and equations of motion.

The system has three bosonic modes: a microwave cavity mode ``a``, a
magnon (Kittel) mode ``m``, and a mechanical mode ``b``.  The cavity and
magnon modes share a radiative bath, which enters the semiclassical
equations of motion as a real cross-damping term with rate ``j_am`` (in
contrast to coherent coupling, which enters as ``-i * g_coh``).  The
magnon and mechanical modes couple through magnetostriction with the
radiation-pressure-like single-quantum rate ``g_mb``.  In a frame rotating
at the drive frequency the equations of motion are

    da/dt = ( i*delta_a - kappa_a) * a - j_am * m - i * g_coh * m
    dm/dt = ( i*delta_m - kappa_m) * m - j_am * a - i * g_coh * a
            - i * g_mb * (b + conj(b)) * m + omega_drive
    db/dt = (-i*omega_b - kappa_b) * b - i * g_mb * conj(m) * m

with detunings ``delta_a = omega_l - omega_a`` and
``delta_m = omega_l - omega_m``.

All integration happens in scaled units with ``omega_b = 1`` (time unit
``1/omega_b``); the rates span roughly nine decades and scaling keeps the
step-size control well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi

#: Gyromagnetic ratio of YIG, rad/s per tesla (28 GHz/T).
GYRO_YIG = TWO_PI * 28e9

# Default operating point.  omega_b, kappa_m, kappa_b, g_mb and the drive
# amplitude B0 follow the cavity-magnomechanics experimental platform;
# kappa_a and n_spin are calibrations (see below).
DEFAULT_OMEGA_B = TWO_PI * 11.42e6
DEFAULT_KAPPA_M = TWO_PI * 0.56e6
DEFAULT_KAPPA_B = TWO_PI * 150.0
DEFAULT_G_MB = TWO_PI * 9.88e-3
DEFAULT_B0 = 3.5e-5

# kappa_a is calibrated so that the linear instability threshold
# sqrt(kappa_a * kappa_m) of the dissipatively coupled (a, m) pair sits at
# 0.43 * omega_b: comb generation then turns on a little below the
# j_am = 0.5 * omega_b grid point, which is itself comfortably supercritical.
DEFAULT_THRESHOLD = 0.43
DEFAULT_KAPPA_A = (DEFAULT_THRESHOLD * DEFAULT_OMEGA_B) ** 2 / DEFAULT_KAPPA_M

# n_spin is calibrated so the drive sits safely below the magnomechanical
# self-oscillation threshold at j_am = 0: the undriven-cavity point then
# settles to a clean fixed point instead of a free-running phonon lasing
# limit cycle.  2e14 spins corresponds to a YIG sphere of roughly 50 um
# diameter at 4.22e27 spins/m^3.
DEFAULT_N_SPIN = 2e14


@dataclass(frozen=True, slots=True)
class PhysicalParams:
    """Lab-frame system parameters, all angular rates in rad/s.

    Detunings are derived: ``delta_a = omega_l - omega_a`` and
    ``delta_m = omega_l - omega_m`` are properties, never stored, so they
    can not fall out of sync with the absolute frequencies.
    """

    omega_b: float = DEFAULT_OMEGA_B
    omega_a: float = TWO_PI * 10e9
    omega_m: float = TWO_PI * 10e9
    omega_l: float = TWO_PI * 10e9 + DEFAULT_OMEGA_B
    kappa_a: float = DEFAULT_KAPPA_A
    kappa_m: float = DEFAULT_KAPPA_M
    kappa_b: float = DEFAULT_KAPPA_B
    g_mb: float = DEFAULT_G_MB
    j_am: float = 0.0
    g_coh: float = 0.0
    drive_omega: float = field(default=-1.0)  # sentinel, filled in __post_init__
    n_spin: float = DEFAULT_N_SPIN

    def __post_init__(self):
        if self.drive_omega < 0.0:
            object.__setattr__(
                self, "drive_omega", compute_rabi(DEFAULT_B0, self.n_spin, GYRO_YIG)
            )
        if self.omega_b <= 0.0:
            raise ValueError("omega_b must be positive")
        for name in ("kappa_a", "kappa_m", "kappa_b", "g_mb", "j_am", "drive_omega"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_spin <= 0.0:
            raise ValueError("n_spin must be positive")

    @property
    def delta_a(self) -> float:
        return self.omega_l - self.omega_a

    @property
    def delta_m(self) -> float:
        return self.omega_l - self.omega_m

    @classmethod
    def from_detunings(cls, delta_a: float, delta_m: float, **kwargs) -> "PhysicalParams":
        """Build parameters from detunings instead of absolute frequencies.

        The magnon frequency defaults to 2*pi*10 GHz; the drive and cavity
        frequencies are placed so the requested detunings hold.  Only the
        detunings matter for the rotating-frame dynamics.
        """
        omega_m = kwargs.pop("omega_m", TWO_PI * 10e9)
        omega_l = omega_m + delta_m
        omega_a = omega_l - delta_a
        return cls(omega_a=omega_a, omega_m=omega_m, omega_l=omega_l, **kwargs)

    def with_j_am(self, j_am: float) -> "PhysicalParams":
        """Copy with a different dissipative coupling (rad/s)."""
        return replace(self, j_am=j_am)

    def scaled(self) -> "ScaledParams":
        return ScaledParams.from_physical(self)


def default_params(j_am_over_omega_b: float = 0.0, **kwargs) -> PhysicalParams:
    """The default operating point with ``j_am`` given in units of omega_b.

    ``delta_a = delta_m = omega_b`` (drive blue-detuned by one mechanical
    frequency from both the cavity and the magnon resonance).
    """
    p = PhysicalParams(**kwargs)
    return p.with_j_am(j_am_over_omega_b * p.omega_b)


@dataclass(frozen=True, slots=True)
class ScaledParams:
    """Dimensionless parameters: every rate divided by ``omega_b``.

    ``omega_b`` is carried along (in rad/s) so the scaling round-trips
    exactly; the scaled mechanical frequency is identically 1.  Time is
    measured in units of ``1/omega_b``.
    """

    omega_b_si: float
    delta_a: float
    delta_m: float
    kappa_a: float
    kappa_m: float
    kappa_b: float
    g_mb: float
    j_am: float
    g_coh: float
    drive_omega: float
    n_spin: float

    #: scaled mechanical frequency, exactly one by construction
    omega_b: float = 1.0

    @classmethod
    def from_physical(cls, p: PhysicalParams) -> "ScaledParams":
        w = p.omega_b
        return cls(
            omega_b_si=w,
            delta_a=p.delta_a / w,
            delta_m=p.delta_m / w,
            kappa_a=p.kappa_a / w,
            kappa_m=p.kappa_m / w,
            kappa_b=p.kappa_b / w,
            g_mb=p.g_mb / w,
            j_am=p.j_am / w,
            g_coh=p.g_coh / w,
            drive_omega=p.drive_omega / w,
            n_spin=p.n_spin,
        )

    def to_physical(self, omega_m: float = TWO_PI * 10e9) -> PhysicalParams:
        """Invert the scaling.  Absolute frequencies are reconstructed from
        the detunings around ``omega_m``."""
        w = self.omega_b_si
        omega_l = omega_m + self.delta_m * w
        return PhysicalParams(
            omega_b=w,
            omega_a=omega_l - self.delta_a * w,
            omega_m=omega_m,
            omega_l=omega_l,
            kappa_a=self.kappa_a * w,
            kappa_m=self.kappa_m * w,
            kappa_b=self.kappa_b * w,
            g_mb=self.g_mb * w,
            j_am=self.j_am * w,
            g_coh=self.g_coh * w,
            drive_omega=self.drive_omega * w,
            n_spin=self.n_spin,
        )

    def as_array(self) -> np.ndarray:
        """Pack into the flat float64 layout the integration kernels use.

        Layout: [omega_b, delta_a, delta_m, kappa_a, kappa_m, kappa_b,
        g_mb, j_am, g_coh, drive_omega].
        """
        return np.array(
            [
                self.omega_b,
                self.delta_a,
                self.delta_m,
                self.kappa_a,
                self.kappa_m,
                self.kappa_b,
                self.g_mb,
                self.j_am,
                self.g_coh,
                self.drive_omega,
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True, slots=True)
class ModeState:
    """The three complex mode amplitudes at one instant.

    ``abs(m)**2`` is the magnon number.  A non-finite component signals an
    integration failure and is never produced by a successful run.
    """

    a: complex = 0j
    m: complex = 0j
    b: complex = 0j

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.m, self.b], dtype=np.complex128)

    @classmethod
    def from_array(cls, arr) -> "ModeState":
        return cls(a=complex(arr[0]), m=complex(arr[1]), b=complex(arr[2]))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_array().view(np.float64))))

    def norm(self) -> float:
        """Euclidean norm over the six real components."""
        return float(np.sqrt(abs(self.a) ** 2 + abs(self.m) ** 2 + abs(self.b) ** 2))


@dataclass(frozen=True, slots=True)
class LinearSteadyState:
    """Fixed point of the ``g_mb = 0`` (linear) system.

    ``gamma_star`` is the dissipative-coupling strength at which the
    coupled (a, m) pair loses stability; ``stable`` comes from the sign of
    the largest real part of the 2x2 system's eigenvalues, so it is
    meaningful for arbitrary detunings.  The fixed point itself exists
    either way (unstable fixed points are returned, flagged).
    """

    a_ss: complex
    m_ss: complex
    stable: bool
    gamma_star: float


def compute_rabi(b0: float, n_spin: float, gyro: float = GYRO_YIG) -> float:
    """Collective Rabi rate of a uniformly driven spin ensemble, rad/s.

    Parameters
    ----------
    b0 : float
        Drive field amplitude in tesla.
    n_spin : float
        Number of spins participating in the Kittel mode.
    gyro : float
        Gyromagnetic ratio in rad/s per tesla.

    Returns
    -------
    float
        ``sqrt(5 * n_spin) * gyro * b0 / 4``.
    """
    if n_spin <= 0.0:
        raise ValueError("n_spin must be positive")
    if gyro <= 0.0:
        raise ValueError("gyro must be positive")
    if b0 < 0.0:
        raise ValueError("b0 must be non-negative")
    return math.sqrt(5.0 * n_spin) * gyro * b0 / 4.0


def kittel_frequency(h_field: float, gyro: float = GYRO_YIG) -> float:
    """Uniform-precession (Kittel) mode frequency for a bias field, rad/s.

    The Kittel mode is tuned linearly by the saturating bias field:
    ``omega_m = gyro * H``.
    """
    if h_field < 0.0:
        raise ValueError("h_field must be non-negative")
    if gyro <= 0.0:
        raise ValueError("gyro must be positive")
    return gyro * h_field


def rhs(state: ModeState, p: ScaledParams) -> ModeState:
    """Time derivative of the three mode amplitudes (pure function).

    Returned as a ModeState whose components are (da/dt, dm/dt, db/dt).
    NaN/Inf inputs propagate; detection is the caller's job.
    """
    from ._kernels import rhs_c

    da, dm, db = rhs_c(
        state.a,
        state.m,
        state.b,
        p.omega_b,
        p.delta_a,
        p.delta_m,
        p.kappa_a,
        p.kappa_m,
        p.kappa_b,
        p.g_mb,
        p.j_am,
        p.g_coh,
        p.drive_omega,
    )
    return ModeState(a=da, m=dm, b=db)


def gamma_star(kappa_a: float, kappa_m: float, delta_a: float, delta_m: float) -> float:
    """Instability threshold of the dissipatively coupled (a, m) pair.

    For equal detunings this is ``sqrt(kappa_a * kappa_m)``; a detuning
    mismatch raises it:

        gamma_star^2 = kappa_a * kappa_m
                       * (1 + ((delta_a - delta_m) / (kappa_a + kappa_m))^2)
    """
    mismatch = (delta_a - delta_m) / (kappa_a + kappa_m)
    return math.sqrt(kappa_a * kappa_m * (1.0 + mismatch * mismatch))


def linear_steady_state(p: ScaledParams) -> LinearSteadyState:
    """Closed-form fixed point of the linear (``g_mb = 0``) system.

    Any ``g_mb`` on ``p`` is ignored; this is the magnetostriction-free
    oracle used to validate the integrator.  With ``ca = i*delta_a -
    kappa_a`` and ``cm = i*delta_m - kappa_m``:

        m_ss = -drive / (cm - c^2 / ca),   a_ss = c * m_ss / ca

    where ``c = j_am + i * g_coh`` is the full cross-coupling coefficient.
    """
    ca = 1j * p.delta_a - p.kappa_a
    cm = 1j * p.delta_m - p.kappa_m
    c = p.j_am + 1j * p.g_coh
    m_ss = -p.drive_omega / (cm - c * c / ca)
    a_ss = c * m_ss / ca
    eigs = np.linalg.eigvals(np.array([[ca, -c], [-c, cm]], dtype=np.complex128))
    g_star = gamma_star(p.kappa_a, p.kappa_m, p.delta_a, p.delta_m)
    return LinearSteadyState(
        a_ss=complex(a_ss),
        m_ss=complex(m_ss),
        stable=bool(np.max(eigs.real) < 0.0),
        gamma_star=g_star,
    )
