"""Input-output scattering of quantum fluctuations around a stable steady state.

Fluctuations ``v = (d_L, d_L^+, d_R, d_R^+)`` obey ``dv/dt = A v + B u`` with
``A`` the drift matrix and ``u`` the input noise operators. In the frequency
domain (``d/dt -> -i Delta``, ``Delta`` measured from the pump) the outgoing
pair ``(a_out(Delta), a_out^+(-Delta))`` is ``S(Delta) u`` with

    S(Delta) = E - C (-i Delta - A)^{-1} B,

where every decay channel contributes one input pair
``(a_c(Delta), a_c^+(-Delta))``. Column 0 of ``S`` is the measurement port's
annihilation input, column 1 its creation (idler) input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
from scipy.integrate import quad_vec
from scipy.optimize import brentq, minimize_scalar

from .estimation.lorentzian import fit_lorentzian
from .errors import FilterOverlap, PreconditionViolation, SingularResolvent
from .model import DimerParams, Drive, pump_frequency
from .semiclassical import lower_branch, lower_branch_threshold

RESOLVENT_COND_MAX = 1e13


def channels(params: DimerParams):
    """Decay channels as (name, rate, mode index); the port always comes first."""
    chans = [("port", params.kappa, 0), ("int_L", params.kappa_int_L, 0),
             ("port_R", params.kappa_R, 1), ("int_R", params.kappa_int_R, 1)]
    return [c for c in chans if c[1] > 0 or c[0] == "port"]


def _io_matrices(params):
    chans = channels(params)
    B = np.zeros((4, 2 * len(chans)))
    for c, (_, rate, mode) in enumerate(chans):
        B[2 * mode, 2 * c] = math.sqrt(rate)
        B[2 * mode + 1, 2 * c + 1] = math.sqrt(rate)
    C = np.zeros((2, 4))
    C[0, 0] = C[1, 1] = math.sqrt(params.kappa)
    E = np.zeros((2, 2 * len(chans)))
    E[0, 0] = E[1, 1] = 1.0
    return B, C, E, [c[0] for c in chans]


def _require_stable(ss):
    if not ss.stable:
        raise PreconditionViolation("fluctuation analysis requires a stable steady state")


@dataclass(frozen=True)
class ScatteringRecord:
    """``S`` maps channel inputs ``(a_c(Delta), a_c^+(-Delta))`` to ``(a_out(Delta), a_out^+(-Delta))``."""

    Delta: float
    S: np.ndarray
    channels: tuple

    @property
    def signal_gain(self) -> float:
        return abs(self.S[0, 0]) ** 2

    @property
    def idler_gain(self) -> float:
        return abs(self.S[0, 1]) ** 2

    def commutator_defect(self) -> float:
        """``|sum_c sigma_c |S_0c|^2 - 1|``; zero for any physical scattering matrix."""
        sig = np.tile([1.0, -1.0], len(self.channels))
        return abs(float(np.sum(sig * np.abs(self.S[0]) ** 2)) - 1.0)


def _scattering_batch(ss, params, Delta):
    Delta = np.atleast_1d(np.asarray(Delta, float))
    A = ss.drift.matrix
    B, C, E, names = _io_matrices(params)
    if not (np.all(np.isfinite(Delta)) and np.all(np.isfinite(A))):
        raise PreconditionViolation("scattering needs finite detunings and a finite drift matrix")
    M = -1j * Delta[:, None, None] * np.eye(4) - A
    cond = np.linalg.cond(M)
    bad = ~(cond < RESOLVENT_COND_MAX)
    if np.any(bad):
        raise SingularResolvent(
            f"resolvent singular at Delta={Delta[bad][0]:.6g} rad/s (cond={cond[bad][0]:.3g})")
    X = np.linalg.solve(M, np.broadcast_to(B, (len(Delta),) + B.shape).astype(complex))
    S = E - C @ X
    return S, names


def scattering_matrix(ss, params: DimerParams, Delta: float) -> ScatteringRecord:
    """Scattering matrix at sideband detuning ``Delta`` from the pump."""
    _require_stable(ss)
    S, names = _scattering_batch(ss, params, Delta)
    return ScatteringRecord(float(Delta), S[0], tuple(names))


def scattering_spectrum(ss, params: DimerParams, Delta_grid) -> np.ndarray:
    """Stacked scattering matrices, shape (len(Delta_grid), 2, 2 * n_channels)."""
    _require_stable(ss)
    return _scattering_batch(ss, params, Delta_grid)[0]


# ---------------------------------------------------------------------------
# gain

@dataclass
class GainSpectrum:
    Delta: np.ndarray
    G_s: np.ndarray
    G_i: np.ndarray
    omega_p: float
    fit: object = None

    @property
    def signal_frequency(self) -> np.ndarray:
        return self.omega_p + self.Delta

    @property
    def idler_frequency(self) -> np.ndarray:
        """``omega_i = 2 omega_p - omega_s``."""
        return self.omega_p - self.Delta

    @property
    def gain_bandwidth_product(self) -> float:
        """``sqrt(G_peak) * FWHM`` of the Lorentzian fit (rad/s)."""
        if self.fit is None:
            return float("nan")
        return math.sqrt(self.fit.peak + self.fit.baseline) * self.fit.fwhm


def gain_spectrum(ss, params: DimerParams, Delta_grid, fit: bool = True) -> GainSpectrum:
    """Signal gain ``|S_00|^2`` and idler gain ``|S_01|^2`` over a detuning grid.

    The idler gain at ``Delta`` is the photon-number gain from an input at
    ``omega_p - Delta`` into the output at ``omega_p + Delta``.
    """
    S = scattering_spectrum(ss, params, Delta_grid)
    Gs = np.abs(S[:, 0, 0]) ** 2
    Gi = np.abs(S[:, 0, 1]) ** 2
    out = GainSpectrum(np.asarray(Delta_grid, float), Gs, Gi, ss.drift.omega_p)
    if fit and len(out.Delta) >= 5:
        out.fit = fit_lorentzian(np.column_stack([out.Delta, Gs]))
    return out


@dataclass(frozen=True)
class GainPeak:
    Delta: float
    gain: float
    fwhm: float

    @property
    def gain_bandwidth_product(self) -> float:
        return math.sqrt(self.gain) * self.fwhm


def gain_peak(ss, params: DimerParams, lo: float, hi: float, n_scan: int = 801) -> GainPeak:
    """Locate the signal-gain maximum in ``[lo, hi]`` and its exact half-maximum width.

    The width is measured at ``G_peak / 2`` on the linear gain, found by root
    bracketing on either side of the peak.
    """
    _require_stable(ss)
    grid = np.linspace(lo, hi, n_scan)
    G = np.abs(scattering_spectrum(ss, params, grid)[:, 0, 0]) ** 2
    k = int(np.argmax(G))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_scan - 1)]

    def g(x):
        return abs(_scattering_batch(ss, params, x)[0][0, 0, 0]) ** 2

    res = minimize_scalar(lambda x: -g(x), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-12 * max(abs(a), abs(b), hi - lo)})
    x0, g0 = float(res.x), -float(res.fun)
    if g0 < G[k]:
        x0, g0 = float(grid[k]), float(G[k])
    half = 0.5 * g0

    def edge(direction):
        step = (hi - lo) / n_scan
        x = x0
        while abs(x - x0) < 1e3 * (hi - lo):
            nx = x + direction * step
            if g(nx) < half:
                return brentq(lambda t: g(t) - half, min(x, nx), max(x, nx), xtol=1e-14 * abs(x0) + 1e-12 * step)
            x = nx
            step *= 1.5
        raise PreconditionViolation("half-maximum not found")

    return GainPeak(x0, g0, edge(+1) - edge(-1))


# ---------------------------------------------------------------------------
# squeezing

@dataclass
class SqueezingSpectrum:
    """``S^phi(Delta)`` normalised to the vacuum (1 = 0 dB)."""

    Delta: np.ndarray
    phi: np.ndarray
    values: np.ndarray  # (len(Delta), len(phi))

    @property
    def dB(self) -> np.ndarray:
        return 10.0 * np.log10(self.values)


def _squeezing_rows(ss, params, Delta):
    S = scattering_spectrum(ss, params, Delta)
    return S[:, 0, :], S[:, 1, :]


def squeezing_spectrum(ss, params: DimerParams, Delta_grid, phi_grid, eta: float = 1.0) -> SqueezingSpectrum:
    """Variance of ``exp(-i phi) a_out(Delta) + exp(i phi) a_out^+(-Delta)`` for vacuum inputs.

    ``eta`` models a detection efficiency as a beam splitter mixing in vacuum.
    """
    if not 0 < eta <= 1:
        raise PreconditionViolation("eta must lie in (0, 1]")
    r0, r1 = _squeezing_rows(ss, params, Delta_grid)
    ph = np.exp(1j * np.asarray(phi_grid, float))
    w = r0[:, None, :] / ph[None, :, None] + r1[:, None, :] * ph[None, :, None]
    var = 0.5 * np.sum(np.abs(w) ** 2, axis=-1)
    return SqueezingSpectrum(np.asarray(Delta_grid, float), np.asarray(phi_grid, float),
                             eta * var + (1.0 - eta))


def squeezing_extrema(ss, params: DimerParams, Delta: float, eta: float = 1.0):
    """(S_min, S_max, phi_min) at one sideband detuning, from the closed-form phase dependence."""
    r0, r1 = _squeezing_rows(ss, params, [Delta])
    r0, r1 = r0[0], r1[0]
    mean = 0.5 * (np.sum(np.abs(r0) ** 2) + np.sum(np.abs(r1) ** 2))
    c = np.sum(r0 * r1.conj())
    lo, hi = mean - abs(c), mean + abs(c)
    phi_min = ((np.angle(c) - math.pi) / 2.0) % math.pi
    return eta * lo + 1 - eta, eta * hi + 1 - eta, phi_min


@dataclass
class PhaseSlice:
    """Squeezing at fixed ``Delta`` versus LO phase with fit ``c0 + c1 cos(2 phi + c2)``."""

    Delta: float
    phi: np.ndarray
    values: np.ndarray
    c0: float
    c1: float
    c2: float
    residual: float

    def model(self, phi):
        return self.c0 + self.c1 * np.cos(2 * np.asarray(phi) + self.c2)


def squeezing_vs_phase(ss, params: DimerParams, Delta: float, phi_grid, eta: float = 1.0) -> PhaseSlice:
    spec = squeezing_spectrum(ss, params, [Delta], phi_grid, eta)
    phi = spec.phi
    y = spec.values[0]
    X = np.column_stack([np.ones_like(phi), np.cos(2 * phi), np.sin(2 * phi)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    c0, a, b = coef
    # a cos 2phi + b sin 2phi = c1 cos(2phi + c2)
    c1 = math.hypot(a, b)
    c2 = math.atan2(-b, a)
    resid = float(np.max(np.abs(X @ coef - y)) / max(np.max(np.abs(y)), 1e-300))
    return PhaseSlice(float(Delta), phi, y, float(c0), c1, c2, resid)


# ---------------------------------------------------------------------------
# band-filtered output state

@dataclass(frozen=True)
class BandMoments:
    """Second moments of the two rectangular band modes A_s, A_i (vacuum inputs)."""

    n_s: float          # <A_s^+ A_s>
    n_i: float          # <A_i^+ A_i>
    m_si: complex       # <A_s A_i>


def _check_bands(omega_p, center_s, center_i, bandwidth):
    if bandwidth <= 0:
        raise PreconditionViolation("bandwidth must be positive")
    ds, di = center_s - omega_p, center_i - omega_p
    scale = max(abs(ds), abs(di), bandwidth)
    if abs(ds + di) > 1e-9 * scale:
        raise PreconditionViolation("filters must be symmetric about the pump")
    if abs(center_s - center_i) < bandwidth:
        raise FilterOverlap("signal and idler bands overlap")
    return ds


def band_moments(ss, params: DimerParams, filter_center_s: float, filter_center_i: float,
                 bandwidth: float, epsrel: float = 1e-8) -> BandMoments:
    _require_stable(ss)
    ds = _check_bands(ss.drift.omega_p, filter_center_s, filter_center_i, bandwidth)
    ncol = 2 * len(channels(params))
    create = np.arange(1, ncol, 2)
    annih = np.arange(0, ncol, 2)

    def integrand(D):
        S = _scattering_batch(ss, params, [D, -D])[0]
        Sp, Sm = S[0, 0], S[1, 0]
        n_plus = np.sum(np.abs(Sp[create]) ** 2)
        n_minus = np.sum(np.abs(Sm[create]) ** 2)
        m = np.sum(Sp[annih] * Sm[create])
        return np.array([n_plus, n_minus, m.real, m.imag])

    lo, hi = ds - 0.5 * bandwidth, ds + 0.5 * bandwidth
    # absolute floor of 1e-13 photons keeps vanishing moments (pump off) from stalling
    val, _ = quad_vec(integrand, lo, hi, epsrel=epsrel, epsabs=1e-13 * bandwidth)
    val /= bandwidth
    return BandMoments(float(val[0]), float(val[1]), complex(val[2], val[3]))


def moments_to_covariance(n_s, n_i, m_si) -> np.ndarray:
    """Symmetric-ordered quadrature covariance (X_s, P_s, X_i, P_i) for a two-mode state.

    Quadratures are ``X = (A + A^+)/sqrt(2)``, ``P = (A - A^+)/(i sqrt(2))`` so the
    vacuum covariance is ``I/2``. Assumes zero mean, ``<A_s A_s> = <A_i A_i> = 0``
    and ``<A_s^+ A_i> = 0``.
    """
    # xi = (A_s, A_i, A_s^+, A_i^+); G[k, l] = <xi_k xi_l>
    n = np.array([[n_s, 0.0], [0.0, n_i]], complex)
    m = np.array([[0.0, m_si], [m_si, 0.0]], complex)
    G = np.block([[m, np.eye(2) + n.T], [n, m.conj()]])
    Gs = 0.5 * (G + G.T)
    r = 1 / math.sqrt(2)
    T = np.zeros((4, 4), complex)
    for k in range(2):
        T[2 * k, k], T[2 * k, k + 2] = r, r
        T[2 * k + 1, k], T[2 * k + 1, k + 2] = -1j * r, 1j * r
    V = T @ Gs @ T.T
    return np.real_if_close(V, tol=1e6).real


def output_covariance(ss, params: DimerParams, filter_center_s: float, filter_center_i: float,
                      bandwidth: float) -> np.ndarray:
    """4x4 covariance of the band-filtered signal and idler quadratures.

    Bands are ideal rectangles of width ``bandwidth`` around the two centres,
    which must sit symmetrically about the pump. For a lossless device the
    filtered state is pure only when the scattering matrix is nearly
    constant across the band.
    """
    bm = band_moments(ss, params, filter_center_s, filter_center_i, bandwidth)
    return moments_to_covariance(bm.n_s, bm.n_i, bm.m_si)


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum of a 2N x 2N covariance in (x1, p1, x2, p2, ...) ordering."""
    V = np.asarray(V, float)
    N = V.shape[0] // 2
    Omega = np.kron(np.eye(N), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    ev = np.abs(np.linalg.eigvals(1j * Omega @ V))
    return np.sort(ev)[::2]


def flux_for_gain(params: DimerParams, omega_p: float, gain: float, Delta_lo: float, Delta_hi: float,
                  flux_threshold: float, rtol: float = 1e-10):
    """Pump flux below ``flux_threshold`` whose peak signal gain in ``[Delta_lo, Delta_hi]`` equals ``gain``.

    Returns ``(flux, steady_state, GainPeak)``. The peak gain grows
    monotonically toward the parametric threshold, so a bisection on the
    flux suffices.
    """
    if gain <= 2:
        # below 3 dB a lossless signal gain never falls to half its peak
        raise PreconditionViolation("target gain must exceed 2 (3 dB) for a defined FWHM")

    def peak(F):
        ss = lower_branch(params, Drive(omega_p, math.sqrt(F)))
        if not ss.stable:
            return ss, None
        try:
            return ss, gain_peak(ss, params, Delta_lo, Delta_hi)
        except PreconditionViolation:
            # peak below 2: no half-maximum point exists
            return ss, GainPeak(float("nan"), 1.0, float("nan"))

    lo, hi = 0.0, flux_threshold
    while hi - lo > rtol * flux_threshold:
        mid = 0.5 * (lo + hi)
        ss, pk = peak(mid)
        if pk is None or pk.gain > gain:
            hi = mid
        else:
            lo = mid
    ss, pk = peak(lo)
    return lo, ss, pk


@dataclass(frozen=True)
class CriticalMode:
    Delta: float             # |sideband detuning| of the pole that reaches the real axis (rad/s)
    growth: float            # real part of that drift eigenvalue (~0 at threshold)
    gain_bandwidth: float    # asymptotic sqrt(G) * FWHM (rad/s)


def critical_mode(ss, params: DimerParams) -> CriticalMode:
    """Pole of the scattering matrix closest to instability and its gain-bandwidth limit.

    Near threshold one drift eigenvalue ``lambda`` with right/left vectors
    ``r, l`` dominates the resolvent,
    ``(-i Delta - A)^{-1} ~ r l^T / ((l^T r)(-i Delta - lambda))``, so the
    signal gain is a Lorentzian with ``FWHM = 2 |Re lambda|`` and
    ``sqrt(G) = kappa |r_0 l_0 / (l^T r)| / |Re lambda|``. Their product

        sqrt(G) * FWHM -> 2 kappa |r_0 l_0 / (l^T r)|

    depends only on how strongly the critical mode couples to the port.
    """
    w, vl, vr = sl.eig(ss.drift.matrix, left=True, right=True)
    i = int(np.argmax(w.real))
    r, l = vr[:, i], vl[:, i].conj()
    return CriticalMode(abs(float(w[i].imag)), float(w[i].real),
                        2.0 * params.kappa * abs(r[0] * l[0] / (l @ r)))


def flux_scale(params: DimerParams) -> float:
    """``kappa**2 / |U|``: input flux at which Kerr shifts become comparable to the linewidth."""
    U = max(abs(params.U_L), abs(params.U_R))
    if U == 0:
        raise PreconditionViolation("flux scale needs a Kerr nonlinearity")
    return params.kappa ** 2 / U


@dataclass(frozen=True)
class OperatingPoint:
    params: DimerParams
    omega_p: float
    flux: float
    steady_state: object
    peak: GainPeak
    critical: CriticalMode
    threshold_flux: float
    threshold_kind: str

    @property
    def drive(self) -> Drive:
        return Drive(self.omega_p, math.sqrt(self.flux))


def gain_operating_point(params: DimerParams, delta: float, gain_dB: float, flux_max: float | None = None,
                         window: float | None = None) -> OperatingPoint:
    """Pump at detuning ``delta`` with the flux that gives ``gain_dB`` of peak signal gain.

    The low branch is followed up to its instability threshold (searched up to
    ``flux_max``, default ``0.6 kappa**2/|U|``); the peak is searched within
    ``window`` (default ``kappa/2``) of the critical sideband detuning.
    """
    omega_p = pump_frequency(params, delta)
    fmax = 0.6 * flux_scale(params) if flux_max is None else flux_max
    th = lower_branch_threshold(params, omega_p, fmax)
    if th.kind == "none":
        raise PreconditionViolation("no instability threshold below flux_max at this detuning")
    cm = critical_mode(lower_branch(params, Drive(omega_p, math.sqrt(th.flux))), params)
    w = 0.5 * params.kappa if window is None else window
    F, ss, pk = flux_for_gain(params, omega_p, 10 ** (gain_dB / 10), cm.Delta - w, cm.Delta + w, th.flux)
    return OperatingPoint(params, omega_p, F, ss, pk, cm, th.flux, th.kind)
