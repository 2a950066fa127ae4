import math
from types import SimpleNamespace

import numpy as np
import pytest

from bhdimer.errors import FilterOverlap, PreconditionViolation, SingularResolvent
from bhdimer.figures import FIT_SET
from bhdimer.fluctuations import (
    band_moments,
    critical_mode,
    flux_for_gain,
    gain_operating_point,
    gain_spectrum,
    output_covariance,
    scattering_matrix,
    scattering_spectrum,
    squeezing_extrema,
    squeezing_spectrum,
    squeezing_vs_phase,
    symplectic_eigenvalues,
)
from bhdimer.model import DimerParams, Drive
from bhdimer.semiclassical import classify_phase, shifted_eigenfrequencies, solve_steady_states

from conftest import random_stable_point
from oracles import ideal_squeezing


@pytest.fixture(scope="module")
def nondegenerate():
    return gain_operating_point(FIT_SET, -1.5 * FIT_SET.kappa, 20.0)


@pytest.fixture(scope="module")
def degenerate():
    return gain_operating_point(FIT_SET, 0.3 * FIT_SET.kappa, 15.0)


def _undriven(p, wp):
    return solve_steady_states(p, Drive(wp, 0.0))[0]


def test_pump_off_is_passive_reflection():
    p = DimerParams(omega_L=10.0, omega_R=10.3, kappa=0.5, J=0.2, U_L=-0.1, U_R=-0.1)
    ss = _undriven(p, 10.1)
    D = np.linspace(-1, 1, 41)
    S = scattering_spectrum(ss, p, D)
    assert np.allclose(S[:, 0, 1], 0, atol=1e-15) and np.allclose(S[:, 1, 0], 0, atol=1e-15)
    assert np.abs(S[:, 0, 0]) == pytest.approx(np.ones_like(D), abs=1e-12)
    gs = gain_spectrum(ss, p, D, fit=False)
    assert gs.G_s == pytest.approx(1.0, abs=1e-12) and np.all(gs.G_i == 0)
    sq = squeezing_spectrum(ss, p, D, np.linspace(0, math.pi, 7))
    assert sq.values == pytest.approx(1.0, abs=1e-12)
    sl = squeezing_vs_phase(ss, p, 0.3, np.linspace(0, math.pi, 9))
    assert sl.values == pytest.approx(1.0, abs=1e-12) and sl.c1 == pytest.approx(0, abs=1e-12)
    V = output_covariance(ss, p, 10.4, 9.8, 0.1)
    assert V == pytest.approx(0.5 * np.eye(4), abs=1e-10)


def test_symplectic_identity_lossless_and_lossy(rng):
    for lossless in (True, False):
        for _ in range(100):
            p, d, ss = random_stable_point(rng, lossless)
            D = rng.uniform(-3, 3)
            rec = scattering_matrix(ss, p, D)
            assert rec.commutator_defect() < 1e-9
            if lossless:
                assert rec.signal_gain - rec.idler_gain - 1 == pytest.approx(0, abs=1e-9)


def test_signal_minus_idler_gain_is_one_on_grids(rng):
    for _ in range(10):
        p, d, ss = random_stable_point(rng)
        gs = gain_spectrum(ss, p, np.linspace(-4, 4, 401), fit=False)
        assert np.max(np.abs(gs.G_s - gs.G_i - 1)) < 1e-9
        assert np.all(gs.G_s >= 1 - 1e-12)


def test_squeezing_reciprocity_and_ideal_law(rng):
    phi = np.linspace(0, math.pi, 721)
    for _ in range(20):
        p, d, ss = random_stable_point(rng)
        D = rng.uniform(-3, 3)
        smin, smax, phimin = squeezing_extrema(ss, p, D)
        assert smin * smax == pytest.approx(1.0, rel=1e-6)
        G = scattering_matrix(ss, p, D).signal_gain
        assert smin == pytest.approx(ideal_squeezing(G), rel=1e-6)
        grid = squeezing_spectrum(ss, p, [D], phi).values[0]
        assert np.all(grid > 0)
        assert grid.min() >= smin * (1 - 1e-9) and grid.max() <= smax * (1 + 1e-9)
        assert squeezing_spectrum(ss, p, [D], [phimin]).values[0, 0] == pytest.approx(smin, rel=1e-9)


def test_detection_efficiency_mixes_in_vacuum(nondegenerate):
    op = nondegenerate
    s1 = squeezing_extrema(op.steady_state, FIT_SET, op.peak.Delta)[0]
    s5 = squeezing_extrema(op.steady_state, FIT_SET, op.peak.Delta, eta=0.5)[0]
    assert s5 == pytest.approx(0.5 * s1 + 0.5, rel=1e-12)
    with pytest.raises(PreconditionViolation):
        squeezing_spectrum(op.steady_state, FIT_SET, [0.0], [0.0], eta=0.0)


def test_phase_dependence_is_a_double_angle_sinusoid(rng):
    for _ in range(10):
        p, d, ss = random_stable_point(rng, lossless=bool(rng.integers(2)))
        sl = squeezing_vs_phase(ss, p, rng.uniform(-2, 2), np.linspace(0, 2 * math.pi, 37))
        assert sl.residual < 1e-9
        assert sl.model(sl.phi) == pytest.approx(sl.values, rel=1e-9)


def test_scattering_continuous_in_detuning(rng):
    # a branch jump would show up as a kink: the second difference at
    # spacing kappa/1e4 of a smooth S is O(1e-8 |S''|)
    for _ in range(5):
        p, d, ss = random_stable_point(rng)
        D = rng.uniform(-2, 2) + np.arange(-2000, 2001) * p.kappa / 1e4
        S = scattering_spectrum(ss, p, D)
        assert np.max(np.abs(np.diff(S, 2, axis=0))) < 1e-6


def test_unstable_state_rejected():
    p = DimerParams(omega_L=100.0, omega_R=100.0, kappa=1.0, J=0.7, U_L=-0.01, U_R=-0.01)
    s = classify_phase(p, Drive(p.omega_0 - 1.1, math.sqrt(15.0))).solutions[0]
    with pytest.raises(PreconditionViolation):
        scattering_matrix(s, p, 0.1)


def test_singular_resolvent_detected():
    p = DimerParams(omega_L=1.0, omega_R=1.0, kappa=1.0, J=0.0)
    A = np.diag([-0.5 - 0.2j, -0.5 + 0.2j, -0.2j, 0.2j])  # undamped right mode at Delta = -0.2
    fake = SimpleNamespace(stable=True, drift=SimpleNamespace(matrix=A, omega_p=0.0))
    with pytest.raises(SingularResolvent):
        scattering_matrix(fake, p, -0.2)


def test_nondegenerate_signal_idler_frequencies(nondegenerate):
    op = nondegenerate
    D = op.peak.Delta + np.linspace(-3, 3, 121) * op.peak.fwhm
    gs = gain_spectrum(op.steady_state, FIT_SET, D)
    assert np.array_equal(gs.idler_frequency, 2 * op.omega_p - gs.signal_frequency)
    assert 10 * math.log10(op.peak.gain) == pytest.approx(20.0, abs=1e-6)
    # the signal peak sits on a drive-shifted normal mode, far from the pump
    w_sig = op.omega_p + op.peak.Delta
    assert min(abs(w - w_sig) for w in shifted_eigenfrequencies(op.steady_state, op.omega_p)) < op.peak.fwhm
    assert abs(op.peak.Delta) > 50 * op.peak.fwhm
    assert gs.fit.center == pytest.approx(op.peak.Delta, abs=0.05 * op.peak.fwhm)


def test_degenerate_gain_is_lorentzian(degenerate):
    op = degenerate
    assert op.threshold_kind == "fold"
    assert abs(op.peak.Delta) < 0.01 * op.peak.fwhm
    D = op.peak.Delta + np.linspace(-0.5, 0.5, 101) * op.peak.fwhm
    gs = gain_spectrum(op.steady_state, FIT_SET, np.linspace(-3, 3, 301) * op.peak.fwhm)
    resid = np.abs(gs.fit(D) - gain_spectrum(op.steady_state, FIT_SET, D, fit=False).G_s)
    assert resid.max() < 0.01 * op.peak.gain


def test_critical_mode_predicts_gain_bandwidth(nondegenerate):
    op = nondegenerate
    cm = critical_mode(op.steady_state, FIT_SET)
    assert cm.growth < 0
    assert op.peak.gain_bandwidth_product == pytest.approx(cm.gain_bandwidth, rel=0.2)


def test_flux_for_gain_requires_definable_width():
    with pytest.raises(PreconditionViolation):
        flux_for_gain(FIT_SET, FIT_SET.omega_0, 1.5, 0.0, 1.0, 1.0)


def test_output_covariance_pure_in_narrow_band(nondegenerate):
    op = nondegenerate
    ws, wi = op.omega_p + op.peak.Delta, op.omega_p - op.peak.Delta
    V = output_covariance(op.steady_state, FIT_SET, ws, wi, 1e-4 * op.peak.fwhm)
    assert symplectic_eigenvalues(V) == pytest.approx([0.5, 0.5], abs=1e-6)
    bm = band_moments(op.steady_state, FIT_SET, ws, wi, 1e-4 * op.peak.fwhm)
    # cross-block encodes <A_s A_i>: (V_xx - V_pp)/2 + i (V_xp + V_px)/2
    m = 0.5 * (V[0, 2] - V[1, 3]) + 0.5j * (V[0, 3] + V[1, 2])
    assert m == pytest.approx(bm.m_si, rel=1e-10)
    assert abs(bm.m_si) > 1.0
    assert bm.n_s == pytest.approx(op.peak.gain - 1, rel=1e-3)


def test_filter_checks(nondegenerate):
    op = nondegenerate
    ss = op.steady_state
    with pytest.raises(FilterOverlap):
        output_covariance(ss, FIT_SET, op.omega_p + 1.0, op.omega_p - 1.0, 5.0)
    with pytest.raises(PreconditionViolation):
        output_covariance(ss, FIT_SET, op.omega_p + op.peak.Delta, op.omega_p - 0.9 * op.peak.Delta, 1.0)
