"""Model-level oracles: drive formula, Kittel tuning, equations of motion,
linear steady state, unit scaling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magcomb import (
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
from magcomb.model import TWO_PI

GYRO = TWO_PI * 28e9

# frozen with 40-digit arithmetic: sqrt(5 * 3.5e16) * (2*pi*28e9) * 3.5e-5 / 4
RABI_PINNED = 643969023263364.84


class TestComputeRabi:
    def test_zero_drive(self):
        assert compute_rabi(0.0, 3.5e16, GYRO) == 0.0

    def test_pinned_value(self):
        assert compute_rabi(3.5e-5, 3.5e16, GYRO) == pytest.approx(RABI_PINNED, rel=1e-12)

    def test_sqrt_spin_scaling(self):
        base = compute_rabi(2e-5, 1e15, GYRO)
        assert compute_rabi(2e-5, 4e15, GYRO) == 2.0 * base

    @pytest.mark.parametrize("n_spin,gyro", [(0.0, GYRO), (-1e10, GYRO), (1e15, 0.0), (1e15, -2.0)])
    def test_invalid_parameters(self, n_spin, gyro):
        with pytest.raises(ValueError):
            compute_rabi(1e-5, n_spin, gyro)

    def test_negative_field_rejected(self):
        with pytest.raises(ValueError):
            compute_rabi(-1e-5, 1e15, GYRO)


class TestKittelFrequency:
    def test_zero_field(self):
        assert kittel_frequency(0.0, GYRO) == 0.0

    def test_one_tesla(self):
        assert kittel_frequency(1.0, GYRO) == pytest.approx(TWO_PI * 28e9, rel=1e-15)

    def test_bias_point(self):
        # 0.357 T puts the Kittel mode at 9.996 GHz
        assert kittel_frequency(0.357, GYRO) == pytest.approx(TWO_PI * 9.996e9, rel=1e-12)

    def test_negative_field_rejected(self):
        with pytest.raises(ValueError):
            kittel_frequency(-0.1, GYRO)


def _rhs_oracle(state: ModeState, p: ScaledParams) -> np.ndarray:
    """Independent transcription of the equations of motion, written as a
    matrix-vector form rather than scalar arithmetic."""
    a, m, b = state.a, state.m, state.b
    lin = np.array(
        [
            [1j * p.delta_a - p.kappa_a, -(p.j_am + 1j * p.g_coh), 0.0],
            [-(p.j_am + 1j * p.g_coh), 1j * p.delta_m - p.kappa_m, 0.0],
            [0.0, 0.0, -1j * p.omega_b - p.kappa_b],
        ],
        dtype=np.complex128,
    )
    vec = lin @ np.array([a, m, b])
    vec[1] += -1j * p.g_mb * (b + np.conj(b)) * m + p.drive_omega
    vec[2] += -1j * p.g_mb * np.conj(m) * m
    return vec


class TestRhs:
    def test_unexcited_fixed_point(self):
        p = default_params(1.0, drive_omega=0.0).scaled()
        d = rhs(ModeState(), p)
        assert d.a == 0 and d.m == 0 and d.b == 0

    def test_drive_enters_magnon_only(self):
        p = default_params(0.7).scaled()
        d = rhs(ModeState(), p)
        assert d.a == 0 and d.b == 0
        assert d.m == pytest.approx(p.drive_omega)

    def test_dual_transcription_oracle(self):
        rng = np.random.default_rng(20240817)
        p = default_params(1.3, g_coh=2e6).scaled()
        for _ in range(32):
            z = rng.standard_normal(6) * 10.0 ** rng.integers(-2, 6, 6)
            state = ModeState(a=z[0] + 1j * z[1], m=z[2] + 1j * z[3], b=z[4] + 1j * z[5])
            got = rhs(state, p).as_array()
            want = _rhs_oracle(state, p)
            assert np.all(np.abs(got - want) <= 1e-12 * np.abs(want) + 1e-300)

    @given(
        j=st.floats(0.0, 5.0),
        drive=st.floats(0.0, 1e7),
        gc=st.floats(0.0, 2.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_drive_linearity(self, j, drive, gc):
        base = default_params(j, g_coh=gc * default_params().omega_b)
        with_drive = PhysicalParams(**{**_fields(base), "drive_omega": drive}).scaled()
        without = PhysicalParams(**{**_fields(base), "drive_omega": 0.0}).scaled()
        diff = rhs(ModeState(), with_drive).as_array() - rhs(ModeState(), without).as_array()
        assert diff[0] == 0 and diff[2] == 0
        assert diff[1] == pytest.approx(drive / base.omega_b, rel=1e-15, abs=1e-300)

    @given(
        phase=st.floats(0.0, TWO_PI),
        re_a=st.floats(-3.0, 3.0), im_a=st.floats(-3.0, 3.0),
        re_m=st.floats(-3.0, 3.0), im_m=st.floats(-3.0, 3.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_gauge_symmetry_without_magnetostriction(self, phase, re_a, im_a, re_m, im_m):
        # with g_mb = 0 and no drive, rotating (a, m) by a common phase
        # rotates their derivatives by the same phase
        p = default_params(0.9, g_mb=0.0, drive_omega=0.0).scaled()
        u = complex(math.cos(phase), math.sin(phase))
        s1 = ModeState(a=re_a + 1j * im_a, m=re_m + 1j * im_m, b=0.4 - 0.2j)
        s2 = ModeState(a=u * s1.a, m=u * s1.m, b=s1.b)
        d1, d2 = rhs(s1, p).as_array(), rhs(s2, p).as_array()
        assert np.allclose(d2[:2], u * d1[:2], rtol=1e-12, atol=1e-14)


class TestLinearSteadyState:
    def test_decoupled_driven_mode(self):
        p = default_params(0.0, g_mb=0.0).scaled()
        ss = linear_steady_state(p)
        assert abs(ss.m_ss) == pytest.approx(
            p.drive_omega / math.hypot(p.delta_m, p.kappa_m), rel=1e-12
        )
        assert ss.a_ss == 0

    def test_symmetric_damping_threshold(self):
        kappa = 0.2 * default_params().omega_b
        p = default_params(0.0, kappa_a=kappa, kappa_m=kappa).scaled()
        assert linear_steady_state(p).gamma_star == pytest.approx(0.2, rel=1e-12)

    def test_against_linear_solve_oracle(self):
        p = default_params(0.3, g_mb=0.0).scaled()
        ss = linear_steady_state(p)
        mat = np.array(
            [
                [1j * p.delta_a - p.kappa_a, -p.j_am],
                [-p.j_am, 1j * p.delta_m - p.kappa_m],
            ]
        )
        a_ss, m_ss = np.linalg.solve(mat, np.array([0.0, -p.drive_omega]))
        assert ss.a_ss == pytest.approx(a_ss, rel=1e-12)
        assert ss.m_ss == pytest.approx(m_ss, rel=1e-12)
        assert ss.stable  # 0.3 < 0.43

    def test_unstable_fixed_point_still_returned(self):
        p = default_params(1.0).scaled()
        ss = linear_steady_state(p)
        assert not ss.stable
        assert np.isfinite([ss.a_ss.real, ss.a_ss.imag, ss.m_ss.real, ss.m_ss.imag]).all()

    def test_eigenvalue_threshold_crossing(self):
        # the largest real part crosses zero exactly at sqrt(kappa_a*kappa_m)
        p0 = default_params(0.0).scaled()
        star = math.sqrt(p0.kappa_a * p0.kappa_m)

        def max_re(j):
            mat = np.array(
                [
                    [1j * p0.delta_a - p0.kappa_a, -j],
                    [-j, 1j * p0.delta_m - p0.kappa_m],
                ]
            )
            return float(np.max(np.linalg.eigvals(mat).real))

        assert max_re(star * 0.999) < 0 < max_re(star * 1.001)
        assert abs(max_re(star)) < 1e-9

    def test_detuning_mismatch_raises_threshold(self):
        p = default_params(0.0).scaled()
        mismatched = gamma_star(p.kappa_a, p.kappa_m, p.delta_a + 0.5, p.delta_m)
        matched = gamma_star(p.kappa_a, p.kappa_m, p.delta_a, p.delta_m)
        assert mismatched > matched
        # dual route: numerical eigenvalues flip sign at the analytic value
        ca = 1j * (p.delta_a + 0.5) - p.kappa_a
        cm = 1j * p.delta_m - p.kappa_m
        for j, sign in ((mismatched * 0.995, -1), (mismatched * 1.005, +1)):
            eigs = np.linalg.eigvals(np.array([[ca, -j], [-j, cm]]))
            assert math.copysign(1, float(np.max(eigs.real))) == sign


class TestScaling:
    @given(
        j=st.floats(0.0, 5.0),
        kappa_a_mhz=st.floats(1.0, 100.0),
        drive=st.floats(0.0, 1e15),
    )
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, j, kappa_a_mhz, drive):
        p = default_params(j, kappa_a=TWO_PI * kappa_a_mhz * 1e6, drive_omega=drive)
        back = p.scaled().to_physical(omega_m=p.omega_m)
        for name in ("omega_b", "omega_a", "omega_m", "omega_l", "kappa_a", "kappa_m",
                     "kappa_b", "g_mb", "j_am", "g_coh", "drive_omega"):
            want = getattr(p, name)
            got = getattr(back, name)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-30)

    def test_scaled_omega_b_is_one(self):
        assert default_params(2.0).scaled().omega_b == 1.0

    def test_parameter_invariants_enforced(self):
        with pytest.raises(ValueError):
            PhysicalParams(kappa_a=-1.0)
        with pytest.raises(ValueError):
            PhysicalParams(omega_b=0.0)
        with pytest.raises(ValueError):
            PhysicalParams(n_spin=0.0)

    def test_detunings_derived(self):
        p = PhysicalParams.from_detunings(
            delta_a=0.5 * DEFAULTS.omega_b, delta_m=-0.25 * DEFAULTS.omega_b
        )
        assert p.delta_a == pytest.approx(0.5 * DEFAULTS.omega_b)
        assert p.delta_m == pytest.approx(-0.25 * DEFAULTS.omega_b)


DEFAULTS = default_params()


def _fields(p: PhysicalParams) -> dict:
    return {
        "omega_b": p.omega_b, "omega_a": p.omega_a, "omega_m": p.omega_m,
        "omega_l": p.omega_l, "kappa_a": p.kappa_a, "kappa_m": p.kappa_m,
        "kappa_b": p.kappa_b, "g_mb": p.g_mb, "j_am": p.j_am, "g_coh": p.g_coh,
        "drive_omega": p.drive_omega, "n_spin": p.n_spin,
    }
