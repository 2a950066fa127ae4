import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bhdimer.errors import PreconditionViolation
from bhdimer.model import (
    DimerParams,
    Drive,
    dbm_to_flux,
    drift_matrix,
    drive_detuning,
    equations_of_motion,
    flux_to_dbm,
    ghz,
    mode_detunings,
    pump_frequency,
    to_ghz,
)
from bhdimer.semiclassical import solve_steady_states

from conftest import random_params
from oracles import hybrid_frequencies, photon_flux

FLUX_M110_779 = 1937342977.7177815  # photons/s at -110 dBm, 7.79 GHz


def test_linear_fixed_point_has_zero_derivative():
    p = DimerParams(omega_L=5.0, omega_R=5.0, kappa=1.0, J=0.0)
    assert equations_of_motion(p, Drive(5.0, 1.0), 2.0, 0.0) == (0, 0)


def test_vacuum_fixed_point():
    p = DimerParams(omega_L=5.0, omega_R=5.3, kappa=1.0, J=0.4, U_L=-0.1, U_R=-0.2)
    assert equations_of_motion(p, Drive(5.1, 0.0), 0.0, 0.0) == (0, 0)


def test_eom_against_hamiltonian_flow(rng):
    # conservative part: d alpha/dt = -i dH/d alpha^*, with
    # H = sum d_X n_X + U_X/2 n_X^2 + J (aL^* aR + aR^* aL) + i sqrt(k) (a_in aL^* - a_in^* aL)
    for _ in range(20):
        p = random_params(rng, lossless=False)
        drive = Drive(100 + rng.normal(), rng.normal() + 1j * rng.normal())
        aL, aR = rng.normal(size=2) + 1j * rng.normal(size=2)
        dL, dR = mode_detunings(p, drive.omega_p)

        def H(x):
            l, r = x[0] + 1j * x[1], x[2] + 1j * x[3]
            nl, nr = abs(l) ** 2, abs(r) ** 2
            return (dL * nl + dR * nr + 0.5 * p.U_L * nl ** 2 + 0.5 * p.U_R * nr ** 2
                    + 2 * p.J * (l.conjugate() * r).real
                    - 2 * math.sqrt(p.kappa) * (drive.alpha_in * l.conjugate()).imag)

        x0 = np.array([aL.real, aL.imag, aR.real, aR.imag])
        h = 1e-6
        grad = np.array([(H(x0 + h * e) - H(x0 - h * e)) / (2 * h) for e in np.eye(4)])
        # dH/d alpha^* = (dH/dx + i dH/dy) / 2
        flow = (-1j * 0.5 * (grad[0] + 1j * grad[1]), -1j * 0.5 * (grad[2] + 1j * grad[3]))
        fL, fR = equations_of_motion(p, drive, aL, aR)
        assert fL == pytest.approx(flow[0] - 0.5 * p.kappa_tot_L * aL, abs=1e-6)
        assert fR == pytest.approx(flow[1] - 0.5 * p.kappa_tot_R * aR, abs=1e-6)


def test_drift_without_kerr_has_hybrid_eigenvalues():
    p = DimerParams(omega_L=10.0, omega_R=10.6, kappa=0.4, J=0.5, kappa_R=0.4)
    wp = 9.8
    ss = solve_steady_states(p, Drive(wp, 3.0))[0]
    A = drift_matrix(p, Drive(wp, 3.0), (ss.alpha_L, ss.alpha_R)).matrix
    assert A[0, 1] == A[2, 3] == 0
    lam = np.linalg.eigvals(A)
    lo, hi = hybrid_frequencies(p.omega_L, p.omega_R, p.J)
    expect = [-1j * (w - wp) - 0.2 for w in (lo, hi)]
    expect += [np.conj(z) for z in expect]
    by_imag = lambda z: np.asarray(z)[np.argsort(np.imag(z))]
    assert by_imag(lam) == pytest.approx(by_imag(expect), abs=1e-12)


def test_drift_undriven_independent_of_kerr():
    base = DimerParams(omega_L=10.0, omega_R=10.2, kappa=0.3, J=0.1)
    d = Drive(10.1, 0.0)
    A0 = drift_matrix(base, d, (0, 0)).matrix
    A1 = drift_matrix(base.with_(U_L=-3.0, U_R=-1.0), d, (0, 0)).matrix
    assert np.array_equal(A0, A1)
    assert np.all(np.linalg.eigvals(A0).real <= 0)


def test_drift_conjugation_symmetry_exact(rng):
    for _ in range(30):
        p = random_params(rng, lossless=False)
        d = Drive(100 + rng.normal(), 3 * rng.normal())
        ss = solve_steady_states(p, d)[0]
        A = ss.drift.matrix
        for i in range(2):
            for j in range(2):
                assert A[2 * i + 1, 2 * j + 1] == np.conj(A[2 * i, 2 * j])
                assert A[2 * i + 1, 2 * j] == np.conj(A[2 * i, 2 * j + 1])


def test_drift_rejects_non_steady_state():
    p = DimerParams(omega_L=10.0, omega_R=10.0, kappa=1.0, J=0.2, U_L=-0.1)
    with pytest.raises(PreconditionViolation):
        drift_matrix(p, Drive(10.0, 1.0), (0.3, 0.1))


def test_dbm_flux_anchor():
    f = dbm_to_flux(-110.0, ghz(7.79))
    assert f == pytest.approx(FLUX_M110_779, rel=1e-12)
    assert f == pytest.approx(photon_flux(-110.0, 7.79e9), rel=1e-12)
    assert f / 1e6 == pytest.approx(2000, rel=0.05)
    assert dbm_to_flux(-np.inf, 1.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-200, 30), st.floats(1e8, 1e11))
def test_dbm_round_trip(p_dbm, f):
    w = 2 * math.pi * f
    assert flux_to_dbm(dbm_to_flux(p_dbm, w), w) == pytest.approx(p_dbm, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_ghz_round_trip(f):
    assert to_ghz(ghz(f)) == pytest.approx(f, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5))
def test_detuning_round_trip(delta):
    p = DimerParams(omega_L=40.0, omega_R=41.0, kappa=1.0, J=0.3)
    assert drive_detuning(p, pump_frequency(p, delta)) == pytest.approx(delta, abs=1e-12)
    dL, dR = mode_detunings(p, pump_frequency(p, delta))
    assert dL + dR == pytest.approx(-2 * delta, abs=1e-12)


@pytest.mark.parametrize("kw", [dict(kappa=0.0), dict(J=-1.0), dict(kappa_R=-0.1), dict(U_L=np.nan)])
def test_params_validation(kw):
    base = dict(omega_L=1.0, omega_R=1.0, kappa=1.0, J=0.1)
    with pytest.raises(PreconditionViolation):
        DimerParams(**{**base, **kw})


def test_kerr_outside_weak_regime_is_allowed():
    p = DimerParams(omega_L=1.0, omega_R=1.0, kappa=1.0, J=0.1, U_L=-50.0)
    assert p.U_L == -50.0
