import math

import numpy as np
import pytest
from scipy.optimize import root

from bhdimer.errors import PreconditionViolation
from bhdimer.model import DimerParams, Drive, equations_of_motion, residual_scale, mode_detunings
from bhdimer.semiclassical import (
    classify_phase,
    lower_branch,
    lower_branch_threshold,
    phase_diagram,
    shifted_eigenfrequencies,
    solve_steady_states,
    vanishing_left_locus,
)

from conftest import random_params
from oracles import hybrid_frequencies, kerr_bistability_window, linear_amplitudes

DIMER = DimerParams(omega_L=100.0, omega_R=100.0, kappa=1.0, J=0.7, U_L=-0.01, U_R=-0.01)
KERR = DimerParams(omega_L=100.0, omega_R=100.0, kappa=1.0, J=0.0, U_L=-0.01)


def _residual_ok(p, drive, s, rtol=1e-9):
    fL, fR = equations_of_motion(p, drive, s.alpha_L, s.alpha_R)
    dL, dR = mode_detunings(p, drive.omega_p)
    scale = residual_scale(p, dL, dR, s.alpha_L, s.alpha_R)
    return math.hypot(abs(fL), abs(fR)) <= rtol * max(scale, 1e-300)


def test_linear_dimer_single_closed_form_solution(rng):
    for _ in range(20):
        p = random_params(rng, lossless=False, kerr=False)
        d = Drive(100 + rng.normal(), rng.normal() + 1j * rng.normal())
        sols = solve_steady_states(p, d)
        assert len(sols) == 1
        ref = linear_amplitudes(p.omega_L, p.omega_R, p.kappa_tot_L, p.kappa_tot_R, p.J, d.omega_p,
                                d.alpha_in, p.kappa)
        assert sols[0].alpha_L == pytest.approx(ref[0], rel=1e-10)
        assert sols[0].alpha_R == pytest.approx(ref[1], rel=1e-10, abs=1e-12)
        assert sols[0].stable


def test_single_kerr_window_matches_cubic():
    d = 2.0  # mode detuning omega_L - omega_p; pump red of the resonance
    lo, hi = kerr_bistability_window(d, 1.0, -0.01)
    wp = KERR.omega_L - d
    for F, n in [(0.9 * lo, 1), (1.02 * lo, 3), (0.5 * (lo + hi), 3), (0.98 * hi, 3), (1.1 * hi, 1)]:
        sols = solve_steady_states(KERR, Drive(wp, math.sqrt(F)))
        assert len(sols) == n, F
        assert classify_phase(KERR, Drive(wp, math.sqrt(F))).region == ("M" if n == 3 else "S")


def test_single_kerr_no_window_below_critical_detuning():
    d = 0.999 * math.sqrt(3) / 2
    assert kerr_bistability_window(d, 1.0, -0.01) is None
    for F in np.linspace(0, 500, 101):
        assert len(solve_steady_states(KERR, Drive(KERR.omega_L - d, math.sqrt(F)))) == 1


def test_single_kerr_solution_count_is_odd(rng):
    for _ in range(100):
        d = Drive(100 + rng.uniform(-1, 4), math.sqrt(rng.uniform(0, 400)))
        assert len(solve_steady_states(KERR, d)) in (1, 3)


def test_every_state_satisfies_equations(rng):
    for _ in range(50):
        p = random_params(rng, lossless=bool(rng.integers(2)))
        d = Drive(p.omega_0 + rng.uniform(-3, 2), math.sqrt(rng.uniform(0, 1) / abs(p.U_L)))
        for s in solve_steady_states(p, d):
            assert _residual_ok(p, d, s)
            assert s.n_L == abs(s.alpha_L) ** 2 and s.n_R == abs(s.alpha_R) ** 2
            assert s.stable == (s.max_real_eigenvalue < -1e-6 * p.kappa)


def test_completeness_against_random_newton_starts(rng):
    for _ in range(12):
        p = random_params(rng, lossless=bool(rng.integers(2)))
        d = Drive(p.omega_0 + rng.uniform(-3, 1.5), math.sqrt(rng.uniform(0.05, 1) / abs(p.U_L)))
        sols = solve_steady_states(p, d)
        known = np.array([[s.alpha_L, s.alpha_R] for s in sols])
        amp = math.sqrt(3 / abs(p.U_L))

        def f(x):
            a, b = equations_of_motion(p, d, x[0] + 1j * x[1], x[2] + 1j * x[3])
            return [a.real, a.imag, b.real, b.imag]

        for _ in range(100):
            r = root(f, rng.uniform(-amp, amp, 4), method="hybr", options={"xtol": 1e-13})
            if not r.success:
                continue
            z = np.array([r.x[0] + 1j * r.x[1], r.x[2] + 1j * r.x[3]])
            fl, fr = equations_of_motion(p, d, *z)
            if math.hypot(abs(fl), abs(fr)) > 1e-9 * max(1.0, np.abs(z).max()):
                continue
            dist = np.min(np.max(np.abs(known - z), axis=1))
            assert dist < 1e-6, (p, d, z)


def test_zero_flux_is_stable_vacuum():
    pt = classify_phase(DIMER, Drive(DIMER.omega_0 - 0.4, 0.0))
    assert pt.region == "S"
    assert abs(pt.solutions[0].alpha_L) == 0


def test_parametric_region_between_shifted_modes():
    pt = classify_phase(DIMER, Drive(DIMER.omega_0 - 1.1, math.sqrt(15.0)))
    assert pt.region == "P"
    assert len(pt.solutions) == 1 and not pt.solutions[0].stable


def test_region_rule(rng):
    for _ in range(200):
        pt = classify_phase(DIMER, Drive(DIMER.omega_0 + rng.uniform(-2.5, 1.5), math.sqrt(rng.uniform(0, 60))))
        n = len(pt.solutions)
        if pt.region == "M":
            assert n >= 2
            assert pt.ambiguous == (pt.n_stable == 0)
        elif pt.region == "P":
            assert n == 1 and pt.n_stable == 0
        else:
            assert pt.region == "S" and n == 1 and pt.n_stable == 1


def test_phase_diagram_zero_flux_and_linear_limit():
    d = np.linspace(-2, 2, 7)
    assert set(phase_diagram(DIMER, d, [0.0]).region.ravel()) == {"S"}
    lin = DIMER.with_(U_L=0.0, U_R=0.0)
    assert set(phase_diagram(lin, d, np.linspace(0, 1e4, 9)).region.ravel()) == {"S"}


def test_phase_diagram_threads_deterministic():
    d, F = np.linspace(-2.5, 1.5, 15), np.linspace(0, 60, 13)
    a = phase_diagram(DIMER, d, F, threads=1)
    b = phase_diagram(DIMER, d, F, threads=4)
    assert np.array_equal(a.region, b.region) and np.array_equal(a.n_solutions, b.n_solutions)
    assert a.point(3, 4).region == a.region[3, 4]


def test_phase_diagram_grid_validation():
    with pytest.raises(PreconditionViolation):
        phase_diagram(DIMER, [0.0, 1.0, 0.5], [1.0])
    with pytest.raises(PreconditionViolation):
        phase_diagram(DIMER, [0.0], [])


def test_phase_diagram_records_errors_in_place(monkeypatch):
    import bhdimer.semiclassical as sc

    real = sc._solve_batch
    calls = {"n": 0}

    def flaky(*a, **k):
        calls["n"] += 1
        if calls["n"] == 2:
            raise sc.NoConvergence("injected")
        return real(*a, **k)

    monkeypatch.setattr(sc, "_solve_batch", flaky)
    pd = sc.phase_diagram(DIMER, np.linspace(-1, 1, 3), [0.0, 5.0])
    assert all(e and "injected" in e for e in pd.error[1])
    assert set(pd.region[0]) == {"S"} and set(pd.region[1]) == {""}


def test_vanishing_left_locus():
    p = DIMER.with_(omega_L=100.0, omega_R=100.3)
    # delta_R > 0 with U_R < 0 gives a positive right occupation
    delta = p.omega_R - p.omega_0 - 1.0
    F = vanishing_left_locus(p, delta)
    sols = solve_steady_states(p, Drive(p.omega_0 + delta, math.sqrt(F)))
    assert any(abs(s.alpha_L) < 1e-6 * abs(s.alpha_R) for s in sols)
    assert vanishing_left_locus(p, p.omega_R - p.omega_0 + 1.0) is None
    with pytest.raises(PreconditionViolation):
        vanishing_left_locus(p.with_(kappa_int_R=0.1), delta)


def test_shifted_frequencies_undriven_are_hybrid():
    # equal decay on both modes keeps the closed-form hybrid splitting exact
    p = DIMER.with_(omega_R=100.4, kappa_R=1.0)
    s = solve_steady_states(p, Drive(99.0, 0.0))[0]
    assert shifted_eigenfrequencies(s, 99.0) == pytest.approx(hybrid_frequencies(p.omega_L, p.omega_R, p.J),
                                                              abs=1e-12)


def test_shifted_frequencies_independent_of_flux_without_kerr():
    p = DIMER.with_(U_L=0.0, U_R=0.0)
    ref = shifted_eigenfrequencies(solve_steady_states(p, Drive(99.0, 0.0))[0], 99.0)
    for F in (1.0, 100.0, 1e4):
        s = solve_steady_states(p, Drive(99.0, math.sqrt(F)))[0]
        assert shifted_eigenfrequencies(s, 99.0) == pytest.approx(ref, abs=1e-12)


def test_red_shift_grows_with_flux():
    wp = DIMER.omega_0 + 1.2
    prev = shifted_eigenfrequencies(solve_steady_states(DIMER, Drive(wp, 0.0))[0], wp)
    for F in np.linspace(1, 200, 40):
        pt = classify_phase(DIMER, Drive(wp, math.sqrt(F)))
        assert pt.region == "S"
        cur = shifted_eigenfrequencies(pt.solutions[0], wp)
        assert cur[0] < prev[0] and cur[1] < prev[1]
        prev = cur


def test_shifted_frequencies_need_stable_state():
    s = classify_phase(DIMER, Drive(DIMER.omega_0 - 1.1, math.sqrt(15.0))).solutions[0]
    with pytest.raises(PreconditionViolation):
        shifted_eigenfrequencies(s, DIMER.omega_0 - 1.1)


def test_lower_branch_threshold_kinds():
    wp = DIMER.omega_0 - 1.5
    th = lower_branch_threshold(DIMER, wp, 60.0)
    assert th.kind == "parametric"
    below = lower_branch(DIMER, Drive(wp, math.sqrt(th.flux * (1 - 1e-6))))
    above = lower_branch(DIMER, Drive(wp, math.sqrt(th.flux * (1 + 1e-6))))
    assert below.stable and not above.stable
    assert lower_branch_threshold(DIMER, DIMER.omega_0 + 0.3, 60.0).kind == "none"
