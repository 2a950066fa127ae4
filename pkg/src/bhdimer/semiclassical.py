"""Classical steady states of the driven dimer and their stability.

The two complex steady-state equations are reduced to one real polynomial in
the right-mode occupation. The right-mode equation gives ``alpha_L`` as a
linear function of ``alpha_R``; substituting into the left-mode equation and
taking the squared modulus leaves

    n_R * |J**2 - D_L(n_R) * c_R(n_R)|**2 = J**2 * kappa * |alpha_in|**2

with ``c_R = delta_R + U_R n_R - i kappa_R/2`` and
``D_L = delta_L + U_L n_L - i kappa_L/2``, ``n_L = |c_R|**2 n_R / J**2``.
That polynomial has degree 9 when both Kerr terms are present. All its roots
come from companion-matrix eigenvalues; every real non-negative root is turned
back into amplitudes and polished by Newton iteration on the full equations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimerError, NoConvergence, PreconditionViolation
from .model import (
    STEADY_RTOL,
    DimerParams,
    Drive,
    DriftMatrix,
    _eom,
    _jacobian,
    mode_detunings,
    pump_frequency,
    residual_scale,
)

STABILITY_RTOL = 1e-6  # in units of kappa
ROOT_IMAG_TOL = 1e-7
NEWTON_STEPS = 12

REGIONS = ("S", "M", "P")


@dataclass(frozen=True)
class SteadyState:
    alpha_L: complex
    alpha_R: complex
    drift: DriftMatrix
    eigenvalues: np.ndarray
    stable: bool
    marginal: bool = False
    residual: float = 0.0
    n_L: float = field(init=False)
    n_R: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n_L", abs(self.alpha_L) ** 2)
        object.__setattr__(self, "n_R", abs(self.alpha_R) ** 2)

    @property
    def max_real_eigenvalue(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def to_dict(self) -> dict:
        return {
            "alpha_L": [self.alpha_L.real, self.alpha_L.imag],
            "alpha_R": [self.alpha_R.real, self.alpha_R.imag],
            "n_L": self.n_L,
            "n_R": self.n_R,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "stable": self.stable,
            "marginal": self.marginal,
            "residual": self.residual,
        }


@dataclass
class PhasePoint:
    delta: float
    flux: float
    solutions: list
    region: str | None
    ambiguous: bool = False
    error: str | None = None

    @property
    def n_stable(self) -> int:
        return sum(s.stable for s in self.solutions)


# ---------------------------------------------------------------------------
# batched polynomial helpers

def _pmul(a, b):
    """Row-wise product of polynomials with coefficients in increasing order."""
    out = np.zeros(a.shape[:-1] + (a.shape[-1] + b.shape[-1] - 1,), dtype=np.result_type(a, b))
    for i in range(a.shape[-1]):
        out[..., i:i + b.shape[-1]] += a[..., i:i + 1] * b
    return out


def _padd(a, b):
    n = max(a.shape[-1], b.shape[-1])
    out = np.zeros(a.shape[:-1] + (n,), dtype=np.result_type(a, b))
    out[..., :a.shape[-1]] += a
    out[..., :b.shape[-1]] += b
    return out


def _batch_roots(coeffs):
    """All roots of each row polynomial (increasing order, nonzero leading term)."""
    deg = coeffs.shape[-1] - 1
    B = coeffs.shape[0]
    comp = np.zeros((B, deg, deg))
    comp[:, np.arange(1, deg), np.arange(deg - 1)] = 1.0
    comp[:, :, -1] = -coeffs[:, :deg] / coeffs[:, deg:deg + 1]
    return np.linalg.eigvals(comp)


def _polish_real_roots(coeffs, x, steps=3):
    """A few Newton steps on the scaled real polynomial."""
    d = coeffs[:, 1:] * np.arange(1, coeffs.shape[-1])
    for _ in range(steps):
        p = np.zeros_like(x)
        dp = np.zeros_like(x)
        for k in range(coeffs.shape[-1] - 1, -1, -1):
            p = p * x + coeffs[:, k:k + 1]
        for k in range(d.shape[-1] - 1, -1, -1):
            dp = dp * x + d[:, k:k + 1]
        ok = np.abs(dp) > 0
        step = np.where(ok, p / np.where(ok, dp, 1.0), 0.0)
        # Newton is only trusted when it stays local
        step = np.where(np.abs(step) < 1e-3 * (1.0 + np.abs(x)), step, 0.0)
        x = x - step
    return x


# ---------------------------------------------------------------------------
# candidate generation

def _candidates_linear(p, dL, dR, alpha_in):
    sk = math.sqrt(p.kappa)
    a11 = 1j * dL + 0.5 * p.kappa_tot_L
    a22 = 1j * dR + 0.5 * p.kappa_tot_R
    det = a11 * a22 + p.J ** 2
    aL = sk * alpha_in * a22 / det
    aR = -1j * p.J * sk * alpha_in / det
    return aL[:, None], aR[:, None], np.ones((len(dL), 1), bool)


def _candidates_single(p, dL, dR, alpha_in):
    """J = 0: the driven left mode alone obeys a cubic in its occupation."""
    sk = math.sqrt(p.kappa)
    if p.U_L == 0.0:
        aL = sk * alpha_in / (1j * dL + 0.5 * p.kappa_tot_L)
        return aL[:, None], np.zeros((len(dL), 1), complex), np.ones((len(dL), 1), bool)
    s = p.kappa_tot_L
    umax = abs(p.U_L)
    N = s / umax
    d = dL / s
    u = p.U_L / umax
    k = p.kappa_tot_L / s
    e = p.kappa * np.abs(alpha_in) ** 2 * umax / s ** 3
    # x((d + u x)^2 + k^2/4) - e
    coeffs = np.stack([-e, d ** 2 + k ** 2 / 4, 2 * d * u, np.full_like(d, u * u)], axis=-1)
    roots = _batch_roots(coeffs)
    x, ok = _accept_roots(coeffs, roots)
    n = N * x
    aL = sk * alpha_in[:, None] / (1j * (dL[:, None] + p.U_L * n) + 0.5 * p.kappa_tot_L)
    return aL, np.zeros_like(aL), ok


def _candidates_dimer(p, dL, dR, alpha_in):
    s = p.kappa_tot_L
    umax = max(abs(p.U_L), abs(p.U_R))
    N = s / umax
    j = p.J / s
    uL, uR = p.U_L / umax, p.U_R / umax
    B = len(dL)
    cR = np.stack([(dR - 0.5j * p.kappa_tot_R) / s, np.full(B, uR, complex)], axis=-1)
    cR2 = _pmul(cR, cR.conj()).real
    # U_L n_L / s as a polynomial in x
    uLnL = np.concatenate([np.zeros((B, 1)), cR2 * (uL / j ** 2)], axis=-1)
    DL = _padd(np.stack([(dL - 0.5j * p.kappa_tot_L) / s], axis=-1), uLnL.astype(complex))
    f = _padd(np.full((B, 1), j ** 2, complex), -_pmul(DL, cR))
    f2 = _pmul(f, f.conj()).real
    e = p.kappa * np.abs(alpha_in) ** 2 * umax / s ** 3
    coeffs = np.concatenate([np.zeros((B, 1)), f2], axis=-1)
    coeffs[:, 0] -= j ** 2 * e
    deg = 9 if (p.U_L != 0 and p.U_R != 0) else 3
    coeffs = coeffs[:, :deg + 1]
    roots = _batch_roots(coeffs)
    x, ok = _accept_roots(coeffs, roots)

    nR = N * x
    c = (dR[:, None] - 0.5j * p.kappa_tot_R) + p.U_R * nR
    nL = np.abs(c) ** 2 * nR / p.J ** 2
    D = (dL[:, None] - 0.5j * p.kappa_tot_L) + p.U_L * nL
    fval = p.J ** 2 - D * c
    safe = np.where(ok, fval, 1.0)
    aR = -1j * p.J * math.sqrt(p.kappa) * alpha_in[:, None] / safe
    aL = -c * aR / p.J
    return aL, aR, ok


def _accept_roots(coeffs, roots):
    real = np.abs(roots.imag) < ROOT_IMAG_TOL * np.maximum(1.0, np.abs(roots))
    x = np.where(real, roots.real, np.nan)
    ok = real & (x > -1e-9 * np.maximum(1.0, np.abs(x)))
    x = np.where(ok, np.clip(x, 0.0, None), 0.0)
    x = np.where(ok, _polish_real_roots(coeffs, x), 0.0)
    return np.clip(x, 0.0, None), ok


# ---------------------------------------------------------------------------
# polishing on the full equations

def _newton(p, dL, dR, alpha_in, aL, aR):
    """Damped Newton on the coupled complex equations; broadcasts over candidates."""
    def resid(aL, aR):
        fL, fR = _eom(p, dL, dR, alpha_in, aL, aR)
        return fL, fR, np.sqrt(np.abs(fL) ** 2 + np.abs(fR) ** 2)

    fL, fR, r = resid(aL, aR)
    for _ in range(NEWTON_STEPS):
        A = _jacobian(p, dL, dR, aL, aR)
        rhs = -np.stack([fL, fL.conj(), fR, fR.conj()], axis=-1)
        try:
            v = np.linalg.solve(A, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            v = (np.linalg.pinv(A) @ rhs[..., None])[..., 0]
        v = np.nan_to_num(v)
        if p.J == 0:
            v[..., 2] = 0.0
            v[..., 3] = 0.0
        nL, nR = aL + v[..., 0], aR + v[..., 2]
        gL, gR, r_new = resid(nL, nR)
        better = r_new < r
        aL = np.where(better, nL, aL)
        aR = np.where(better, nR, aR)
        fL = np.where(better, gL, fL)
        fR = np.where(better, gR, fR)
        r = np.where(better, r_new, r)
        if not np.any(better):
            break
    return aL, aR, r


# ---------------------------------------------------------------------------

@dataclass
class _Batch:
    """Flat record of all solutions for a batch of drives."""

    point: np.ndarray       # index into the batch
    alpha_L: np.ndarray
    alpha_R: np.ndarray
    eigenvalues: np.ndarray  # (n, 4)
    drift: np.ndarray        # (n, 4, 4)
    stable: np.ndarray
    marginal: np.ndarray
    residual: np.ndarray
    failed: np.ndarray       # per batch point: bool
    failed_root: np.ndarray  # per batch point: offending amplitude (nan if fine)


def _solve_batch(p: DimerParams, omega_p, alpha_in, rtol=STEADY_RTOL) -> _Batch:
    omega_p = np.atleast_1d(np.asarray(omega_p, float))
    alpha_in = np.atleast_1d(np.asarray(alpha_in, complex))
    omega_p, alpha_in = np.broadcast_arrays(omega_p, alpha_in)
    B = len(omega_p)
    dL, dR = mode_detunings(p, omega_p)

    driven = np.abs(alpha_in) > 0
    if p.U_L == 0 and p.U_R == 0:
        gen = _candidates_linear
    elif p.J == 0:
        gen = _candidates_single
    else:
        gen = _candidates_dimer
    aL, aR, ok = gen(p, dL, dR, alpha_in)
    # undriven points: the vacuum is the only fixed point
    aL = np.where(driven[:, None], aL, 0.0)
    aR = np.where(driven[:, None], aR, 0.0)
    ok = np.where(driven[:, None], ok, False)
    ok[~driven, 0] = True

    idx, col = np.nonzero(ok)
    cL, cR = aL[idx, col], aR[idx, col]
    cdL, cdR, cin = dL[idx], dR[idx], alpha_in[idx]
    cL, cR, res = _newton(p, cdL, cdR, cin, cL, cR)
    scale = residual_scale(p, cdL, cdR, cL, cR)
    rel = np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), np.where(res > 0, np.inf, 0.0))
    good = rel <= rtol

    failed = np.zeros(B, bool)
    failed_root = np.full(B, np.nan, complex)
    bad = np.nonzero(~good)[0]
    failed[idx[bad]] = True
    failed_root[idx[bad]] = cL[bad]

    # deduplicate per point (candidates of one point are contiguous in idx)
    keep = good.copy()
    amp = np.sqrt(np.abs(cL) ** 2 + np.abs(cR) ** 2)
    order = np.lexsort((amp, idx))
    prev = -1
    kept = []
    for k in order:
        if not keep[k]:
            continue
        if idx[k] != prev:
            kept = []
            prev = idx[k]
        tol = 1e-7 * max(amp[k], 1e-300)
        if any(abs(cL[k] - cL[m]) + abs(cR[k] - cR[m]) <= tol for m in kept):
            keep[k] = False
        else:
            kept.append(k)

    sel = np.nonzero(keep)[0]
    sel = sel[np.lexsort((amp[sel], idx[sel]))]
    A = _jacobian(p, cdL[sel], cdR[sel], cL[sel], cR[sel])
    if p.J == 0:
        eig_judge = np.linalg.eigvals(A[:, :2, :2])
    else:
        eig_judge = None
    eig = np.linalg.eigvals(A) if len(sel) else np.zeros((0, 4), complex)
    judge = eig if eig_judge is None else eig_judge
    tol = STABILITY_RTOL * p.kappa
    maxre = judge.real.max(axis=-1) if len(sel) else np.zeros(0)
    stable = maxre < -tol
    marginal = np.abs(maxre) <= tol
    return _Batch(idx[sel], cL[sel], cR[sel], eig, A, stable, marginal, rel[sel], failed, failed_root)


def _states_for(batch: _Batch, i: int, omega_p: float) -> list:
    out = []
    for k in np.nonzero(batch.point == i)[0]:
        A = batch.drift[k]
        A.setflags(write=False)
        out.append(SteadyState(
            complex(batch.alpha_L[k]), complex(batch.alpha_R[k]),
            DriftMatrix(A, complex(batch.alpha_L[k]), complex(batch.alpha_R[k]), omega_p),
            batch.eigenvalues[k], bool(batch.stable[k]), bool(batch.marginal[k]),
            float(batch.residual[k]),
        ))
    return out


def solve_steady_states(params: DimerParams, drive: Drive) -> list:
    """All classical steady states for one drive, sorted by total occupation.

    Raises
    ------
    NoConvergence
        If a root of the reduced polynomial does not polish into a solution
        of the full equations.
    """
    batch = _solve_batch(params, drive.omega_p, drive.alpha_in)
    if batch.failed[0]:
        raise NoConvergence("polynomial root failed the steady-state residual check",
                            root=complex(batch.failed_root[0]))
    return _states_for(batch, 0, drive.omega_p)


def _region(n_sol, n_stable):
    if n_sol >= 2:
        return "M", n_stable == 0
    if n_sol == 1:
        return ("S" if n_stable == 1 else "P"), False
    return None, False


def classify_phase(params: DimerParams, drive: Drive) -> PhasePoint:
    """Label a drive S (unique stable), M (several solutions) or P (unique, unstable).

    Several solutions with none stable are reported as M with ``ambiguous``
    set.
    """
    sols = solve_steady_states(params, drive)
    region, ambiguous = _region(len(sols), sum(s.stable for s in sols))
    return PhasePoint(drive.omega_p - params.omega_0, drive.flux, sols, region, ambiguous)


@dataclass
class PhaseDiagram:
    """Classification of a (delta, flux) grid; arrays are indexed [i_delta, i_flux]."""

    params: DimerParams
    delta: np.ndarray
    flux: np.ndarray
    n_solutions: np.ndarray
    n_stable: np.ndarray
    region: np.ndarray      # dtype '<U1', '' where the point failed
    ambiguous: np.ndarray
    error: np.ndarray       # dtype object, None or message
    _batches: list = field(default_factory=list, repr=False)

    def counts(self) -> dict:
        return {r: int(np.sum(self.region == r)) for r in REGIONS}

    def fractions(self) -> dict:
        total = self.region.size
        return {r: c / total for r, c in self.counts().items()}

    def point(self, i: int, j: int) -> PhasePoint:
        batch, offset = self._batches[i]
        k = offset + j
        omega_p = pump_frequency(self.params, self.delta[i])
        sols = _states_for(batch, k, omega_p)
        return PhasePoint(float(self.delta[i]), float(self.flux[j]), sols,
                          self.region[i, j] or None, bool(self.ambiguous[i, j]), self.error[i, j])

    @property
    def points(self) -> list:
        return [[self.point(i, j) for j in range(len(self.flux))] for i in range(len(self.delta))]


def _check_grid(g, name):
    g = np.asarray(g, float)
    if g.ndim != 1 or g.size == 0:
        raise PreconditionViolation(f"{name} must be a non-empty 1-D grid")
    d = np.diff(g)
    if g.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise PreconditionViolation(f"{name} must be strictly monotone")
    if name == "flux_grid" and np.any(g < 0):
        raise PreconditionViolation("flux must be non-negative")
    return g


def phase_diagram(params: DimerParams, delta_grid, flux_grid, threads: int = 1) -> PhaseDiagram:
    """Classify every (drive detuning, input flux) pair of a rectangular grid.

    Rows (fixed detuning) are independent and may be evaluated on ``threads``
    worker threads; results land in pre-assigned slots so the output does not
    depend on scheduling. A failing point is recorded in ``error`` and left
    unclassified rather than aborting the scan.
    """
    delta = _check_grid(delta_grid, "delta_grid")
    flux = _check_grid(flux_grid, "flux_grid")
    nd, nf = len(delta), len(flux)
    n_sol = np.zeros((nd, nf), int)
    n_st = np.zeros((nd, nf), int)
    region = np.full((nd, nf), "", dtype="<U1")
    amb = np.zeros((nd, nf), bool)
    err = np.full((nd, nf), None, dtype=object)
    batches = [None] * nd
    alpha = np.sqrt(flux).astype(complex)

    def row(i):
        omega_p = np.full(nf, pump_frequency(params, delta[i]))
        try:
            b = _solve_batch(params, omega_p, alpha)
        except (DimerError, np.linalg.LinAlgError, FloatingPointError) as exc:
            err[i, :] = f"{type(exc).__name__}: {exc}"
            return
        batches[i] = (b, 0)
        cs = np.bincount(b.point, minlength=nf)
        st = np.bincount(b.point, weights=b.stable, minlength=nf).astype(int)
        n_sol[i] = cs
        n_st[i] = st
        for j in range(nf):
            if b.failed[j]:
                err[i, j] = f"NoConvergence: root {b.failed_root[j]:.6g}"
                continue
            r, a = _region(cs[j], st[j])
            region[i, j] = r or ""
            amb[i, j] = a

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(row, range(nd)))
    else:
        for i in range(nd):
            row(i)
    return PhaseDiagram(params, delta, flux, n_sol, n_st, region, amb, err, batches)


def vanishing_left_locus(params: DimerParams, delta: float):
    """Input flux at which a steady state with ``alpha_L = 0`` exists.

    With a lossless right mode, ``alpha_L = 0`` forces
    ``n_R = -delta_R / U_R`` and ``flux = J**2 n_R / kappa``. Returns ``None``
    when that occupation would be negative (or undefined).
    """
    if params.kappa_tot_R != 0:
        raise PreconditionViolation("the alpha_L = 0 locus requires a lossless right mode")
    if params.J == 0 or params.U_R == 0:
        return None
    _, dR = mode_detunings(params, pump_frequency(params, delta))
    nR = -dR / params.U_R
    if nR < 0:
        return None
    return params.J ** 2 * nR / params.kappa


def shifted_eigenfrequencies(ss: SteadyState, omega_p: float):
    """Drive-shifted normal-mode frequencies (lower, upper) of a stable state.

    Each conjugate pair of drift eigenvalues is represented by the member
    whose eigenvector lives mostly on the annihilation components; its mode
    frequency is ``omega_p - Im(lambda)``.
    """
    if not ss.stable:
        raise PreconditionViolation("shifted eigenfrequencies need a stable steady state")
    lam, vec = np.linalg.eig(ss.drift.matrix)
    w = np.abs(vec) ** 2
    norm = w[0] - w[1] + w[2] - w[3]
    pick = np.argsort(-norm)[:2]
    freqs = np.sort(omega_p - lam[pick].imag)
    return float(freqs[0]), float(freqs[1])


def lower_branch(params: DimerParams, drive: Drive) -> SteadyState:
    """Steady state with the smallest left-mode occupation."""
    return min(solve_steady_states(params, drive), key=lambda s: s.n_L)


@dataclass(frozen=True)
class Threshold:
    flux: float     # last flux at which the low branch is still stable (nan if none found)
    kind: str       # "parametric" (a drift eigenvalue crosses zero), "fold" or "none"


def lower_branch_threshold(params: DimerParams, omega_p: float, flux_max: float,
                           n_scan: int = 400, rtol: float = 1e-12) -> Threshold:
    """Input flux at which the low-amplitude branch stops being a usable operating point.

    Walking up in flux from zero, the low branch either loses stability
    (``parametric``: its largest real drift eigenvalue reaches zero) or merges
    with the middle branch and disappears (``fold``: the solution count drops
    from three or more back to one). The first event on a scan of
    ``[0, flux_max]`` is refined by bisection. Both events make the linear
    gain diverge; at a fold the critical eigenvalue is real, so the gain
    is degenerate (centred at the pump).
    """
    def state(F):
        sols = solve_steady_states(params, Drive(omega_p, math.sqrt(F)))
        return len(sols), min(sols, key=lambda s: s.n_L).max_real_eigenvalue

    grid = np.linspace(0.0, flux_max, n_scan + 1)
    prev, multi = grid[0], False
    for F in grid[1:]:
        n, g = state(F)
        if g >= 0:
            kind, lost = "parametric", (lambda x: state(x)[1] >= 0)
        elif multi and n == 1:
            kind, lost = "fold", (lambda x: state(x)[0] == 1)
        else:
            multi = multi or n > 1
            prev = F
            continue
        lo, hi = prev, F
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if lost(mid):
                hi = mid
            else:
                lo = mid
        return Threshold(float(lo), kind)
    return Threshold(float("nan"), "none")
