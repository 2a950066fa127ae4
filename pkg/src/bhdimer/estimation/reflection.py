"""Linear reflection coefficient of the dimer and phase-only parameter fits."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from ..errors import Ambiguous, FitDiverged, PreconditionViolation
from ..model import TWO_PI, DimerParams

STALL_RMS = 0.15  # rad; a converged fit to sane data sits far below this


def reflection_model(params: DimerParams, omega):
    """Weak-probe reflection ``Gamma(omega) = a_out / a_in`` (Kerr terms ignored)."""
    w = np.asarray(omega, float)
    inner = 1j * (params.omega_R - w) + 0.5 * params.kappa_tot_R
    # multiplied through by ``inner`` so a lossless right mode has no pole at omega_R
    outer = 1j * (params.omega_L - w) + 0.5 * params.kappa_tot_L
    if params.J == 0.0:
        # uncoupled: the right mode drops out, leaving a single resonator
        g = 1.0 - params.kappa / outer
    else:
        g = 1.0 - params.kappa * inner / (outer * inner + params.J ** 2)
    return complex(g) if np.ndim(g) == 0 else g


def phase_winding(gamma) -> float:
    """Total unwrapped change of ``Arg Gamma`` along a trace (rad, absolute value)."""
    ph = np.unwrap(np.angle(np.asarray(gamma)))
    return float(abs(ph[-1] - ph[0]))


@dataclass
class ReflectionTrace:
    frequencies: np.ndarray          # rad/s, strictly increasing
    gamma: np.ndarray | None = None  # complex
    phase: np.ndarray | None = None  # wrapped, rad
    noise: float | None = None       # phase noise, rad

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, float)
        if self.frequencies.ndim != 1 or np.any(np.diff(self.frequencies) <= 0):
            raise PreconditionViolation("frequencies must be strictly increasing")
        if self.gamma is None and self.phase is None:
            raise PreconditionViolation("trace needs gamma or phase data")
        if self.gamma is not None:
            self.gamma = np.asarray(self.gamma, complex)
        if self.phase is not None:
            self.phase = np.angle(np.exp(1j * np.asarray(self.phase, float)))

    @property
    def phases(self) -> np.ndarray:
        return self.phase if self.phase is not None else np.angle(self.gamma)

    def to_csv(self, path):
        f = self.frequencies / TWO_PI
        if self.gamma is not None:
            arr, head = np.column_stack([f, self.gamma.real, self.gamma.imag]), "freq_Hz,re_gamma,im_gamma"
        else:
            arr, head = np.column_stack([f, self.phase]), "freq_Hz,phase_rad"
        np.savetxt(path, arr, delimiter=",", header=head, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            head = fh.readline().strip().split(",")
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        w = arr[:, 0] * TWO_PI
        if head[1:] == ["re_gamma", "im_gamma"]:
            return cls(w, gamma=arr[:, 1] + 1j * arr[:, 2])
        if head[1:] == ["phase_rad"]:
            return cls(w, phase=arr[:, 1])
        raise PreconditionViolation(f"unrecognised trace columns {head}")


def synthetic_trace(params: DimerParams, frequencies, phase_noise: float = 0.0, seed=None) -> ReflectionTrace:
    """Model phase trace with additive Gaussian phase noise (rad)."""
    g = reflection_model(params, frequencies)
    ph = np.angle(g)
    if phase_noise > 0:
        ph = ph + np.random.default_rng(seed).normal(0.0, phase_noise, size=ph.shape)
    return ReflectionTrace(frequencies, phase=ph, noise=phase_noise or None)


@dataclass
class FitResult:
    params: DimerParams
    residual: float                 # sum of squared wrapped phase errors, rad^2
    ci: dict                        # 95% half-widths (rad/s) per parameter
    nfev: int
    converged: bool
    starts: int = 1
    message: str = ""
    alternatives: list = field(default_factory=list)

    @property
    def omega_L(self):
        return self.params.omega_L

    @property
    def omega_R(self):
        return self.params.omega_R

    @property
    def kappa(self):
        return self.params.kappa

    @property
    def J(self):
        return self.params.J

    def values(self) -> np.ndarray:
        return np.array([self.omega_L, self.omega_R, self.kappa, self.J])

    def recompute_residual(self, trace: ReflectionTrace) -> float:
        return float(np.sum(_wrapped(self.params, trace) ** 2))

    def to_dict(self) -> dict:
        g = 1 / (TWO_PI * 1e9)
        return {
            "omega_L_GHz": self.omega_L * g, "omega_R_GHz": self.omega_R * g,
            "kappa_GHz": self.kappa * g, "J_GHz": self.J * g,
            "ci95_GHz": {k: v * g for k, v in self.ci.items()},
            "residual_rad2": self.residual, "nfev": self.nfev, "converged": self.converged,
            "starts": self.starts, "message": self.message,
        }


NAMES = ("omega_L", "omega_R", "kappa", "J")


def _wrapped(params, trace):
    return np.angle(np.exp(1j * (np.angle(reflection_model(params, trace.frequencies)) - trace.phases)))


class _Problem:
    """Fit coordinates: frequencies and rates in units of the trace span, offset to its centre."""

    def __init__(self, trace, template: DimerParams):
        self.trace = trace
        self.template = template
        w = trace.frequencies
        self.center = 0.5 * (w[0] + w[-1])
        self.scale = w[-1] - w[0]
        self.x = (w - self.center) / self.scale
        self.y = trace.phases
        t = template
        self.kR = t.kappa_tot_R / self.scale
        self.kint = t.kappa_int_L / self.scale

    def to_q(self, theta):
        wl, wr, k, j = theta
        return np.array([(wl - self.center) / self.scale, (wr - self.center) / self.scale,
                         k / self.scale, j / self.scale])

    def to_theta(self, q):
        return np.array([q[0] * self.scale + self.center, q[1] * self.scale + self.center,
                         abs(q[2]) * self.scale, abs(q[3]) * self.scale])

    def resid(self, q):
        wl, wr, k, j = q[0], q[1], abs(q[2]), abs(q[3])
        inner = 1j * (wr - self.x) + 0.5 * self.kR
        g = 1.0 - k * inner / ((1j * (wl - self.x) + 0.5 * (k + self.kint)) * inner + j * j)
        return np.angle(np.exp(1j * (np.angle(g) - self.y)))

    def cost(self, q):
        r = self.resid(q)
        return float(r @ r)

    def params(self, q):
        wl, wr, k, j = self.to_theta(q)
        return self.template.with_(omega_L=wl, omega_R=wr, kappa=k, J=j)


def _local_fit(prob, q0):
    nm = minimize(prob.cost, q0, method="Nelder-Mead",
                  options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000, "adaptive": True})
    lm = least_squares(prob.resid, nm.x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    q = lm.x
    cost = float(lm.fun @ lm.fun)
    if cost > nm.fun:
        q, cost = nm.x, float(nm.fun)
    return q, cost, nm.nfev + lm.nfev, lm.jac


def fit_reflection(trace: ReflectionTrace, initial_guess: DimerParams, multistart: bool = True) -> FitResult:
    """Fit (omega_L, omega_R, kappa, J) to the phase of a reflection trace.

    Minimises the summed squared circular distance between model and
    measured ``Arg Gamma``. A Nelder-Mead simplex from ``initial_guess`` is
    followed by a Levenberg-Marquardt polish. If the result stalls (rms phase
    error above ``STALL_RMS``), the fit restarts from a coarse grid of mode
    frequencies across the trace.

    Raises
    ------
    FitDiverged
        If the final residual is not below the residual of the initial guess.
    Ambiguous
        If the restarts find two distinct minima within a factor two in residual.
    """
    prob = _Problem(trace, initial_guess)
    g = initial_guess
    q0 = prob.to_q([g.omega_L, g.omega_R, g.kappa, g.J])
    cost0 = prob.cost(q0)
    q, cost, nfev, jac = _local_fit(prob, q0)
    starts = 1
    alternatives = []
    npts = len(prob.x)
    if multistart and math.sqrt(cost / npts) > STALL_RMS:
        found = [(cost, q, jac)]
        grid = (np.arange(4) + 0.5) / 4 - 0.5
        for a, b in itertools.product(grid, grid):
            if a == b:
                continue
            qs, cs, nf, js = _local_fit(prob, np.array([a, b, q0[2], q0[3]]))
            found.append((cs, qs, js))
            nfev += nf
            starts += 1
        found.sort(key=lambda t: t[0])
        cost, q, jac = found[0]
        best = prob.to_theta(q)
        for c2, q2, _ in found[1:]:
            other = prob.to_theta(q2)
            if np.max(np.abs(other - best) / prob.scale) > 1e-3 and c2 <= 2 * max(cost, 1e-300):
                alternatives = [prob.params(q), prob.params(q2)]
                raise Ambiguous("two distinct minima with comparable residuals", alternatives)
    if not cost < cost0 and cost0 > 0:
        raise FitDiverged(f"residual not reduced (initial {cost0:.4g}, final {cost:.4g})")

    # curvature-based 95% intervals in physical units
    dof = max(npts - 4, 1)
    s2 = cost / dof
    try:
        cov_q = np.linalg.inv(jac.T @ jac) * s2
        sig = np.sqrt(np.abs(np.diag(cov_q))) * prob.scale
    except np.linalg.LinAlgError:
        sig = np.full(4, np.inf)
    ci = {name: float(1.96 * s) for name, s in zip(NAMES, sig)}
    return FitResult(prob.params(q), float(np.sum(_wrapped(prob.params(q), trace) ** 2)), ci, int(nfev),
                     True, starts, "ok", alternatives)
