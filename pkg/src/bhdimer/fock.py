"""Truncated two-mode Fock-space master equation, used as a brute-force check.

The steady state solves ``L(rho) = 0`` for the pump-frame Hamiltonian

    H = dL a^+a + dR b^+b + U_L/2 a^+a^+aa + U_R/2 b^+b^+bb
        + J (a b^+ + b a^+) + i sqrt(kappa) (alpha_in a^+ - alpha_in^* a)

with Lindblad dissipators at the total decay rate of each mode.

Two solvers are provided. ``direct`` assembles the sparse Liouvillian on
column-stacked ``vec(rho)``, replaces one equation by the trace condition and
factorises it; LU fill-in makes this slow beyond a few hundred states.
``splitting`` writes the master equation as

    H_eff rho + rho H_eff^+ + sum_c c rho c^+ = 0,   H_eff = -iH - 1/2 sum_c c^+ c,

so the steady state is the eigenvalue-1 fixed point of
``rho -> -Sylv^{-1}(sum_c c rho c^+)``. The Sylvester inverse reuses one
Schur factorisation of ``H_eff`` and the fixed point is found by Arnoldi
iteration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
import scipy.sparse as sp
from scipy.linalg.lapack import ztrsyl
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, MatrixRankWarning, eigs, spsolve

from .errors import PreconditionViolation, SolveFailure, TruncationError
from .model import DimerParams, Drive, mode_detunings

MAX_STATES = 400
TOP_LAYER_TOL = 1e-6
DIRECT_MAX_STATES = 64


@dataclass(frozen=True)
class FockConfig:
    n_max_L: int = 12
    n_max_R: int = 12
    tol: float = 1e-10

    def __post_init__(self):
        if self.n_max_L < 1 or self.n_max_R < 1:
            raise PreconditionViolation("truncation levels must be at least 1")
        if self.dim > MAX_STATES:
            raise PreconditionViolation(f"(n_max_L+1)(n_max_R+1) = {self.dim} exceeds {MAX_STATES}")

    @property
    def dim(self) -> int:
        return (self.n_max_L + 1) * (self.n_max_R + 1)


@dataclass(frozen=True)
class QuantumSteadyState:
    rho: np.ndarray
    a_L: complex
    a_R: complex
    n_L: float
    n_R: float
    a_L_a_R: complex
    top_population: float
    config: FockConfig


def _ops(cfg: FockConfig):
    def lower(n):
        return sp.diags(np.sqrt(np.arange(1, n + 1, dtype=float)), 1, format="csr")

    iL = sp.identity(cfg.n_max_L + 1, format="csr")
    iR = sp.identity(cfg.n_max_R + 1, format="csr")
    a = sp.kron(lower(cfg.n_max_L), iR, format="csr")
    b = sp.kron(iL, lower(cfg.n_max_R), format="csr")
    return a, b


def hamiltonian(params: DimerParams, drive: Drive, cfg: FockConfig):
    a, b = _ops(cfg)
    dL, dR = mode_detunings(params, drive.omega_p)
    ad, bd = a.getH(), b.getH()
    H = (dL * ad @ a + dR * bd @ b
         + 0.5 * params.U_L * ad @ ad @ a @ a + 0.5 * params.U_R * bd @ bd @ b @ b
         + params.J * (a @ bd + b @ ad)
         + 1j * math.sqrt(params.kappa) * (drive.alpha_in * ad - np.conj(drive.alpha_in) * a))
    return H.tocsr(), a, b


def liouvillian(params: DimerParams, drive: Drive, cfg: FockConfig):
    """Sparse superoperator on column-stacked ``vec(rho)``: vec(A rho B) = (B^T kron A) vec(rho)."""
    H, a, b = hamiltonian(params, drive, cfg)
    d = cfg.dim
    I = sp.identity(d, format="csr")
    L = -1j * (sp.kron(I, H) - sp.kron(H.T, I))
    for c, rate in ((a, params.kappa_tot_L), (b, params.kappa_tot_R)):
        if rate == 0:
            continue
        cdc = (c.getH() @ c).tocsr()
        L = L + rate * (sp.kron(c.conj(), c) - 0.5 * sp.kron(I, cdc) - 0.5 * sp.kron(cdc.T, I))
    return L.tocsr()


def _collapse_ops(params, a, b):
    out = []
    for c, rate in ((a, params.kappa_tot_L), (b, params.kappa_tot_R)):
        if rate > 0:
            out.append((math.sqrt(rate) * c).toarray())
    return out


def _solve_direct(params, drive, cfg):
    d = cfg.dim
    L = liouvillian(params, drive, cfg).tolil()
    rhs = np.zeros(d * d, complex)
    # replace the equation for rho_00 by the trace condition
    trace_row = np.zeros(d * d, complex)
    trace_row[np.arange(d) * (d + 1)] = 1.0
    L[0, :] = trace_row
    rhs[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            x = spsolve(L.tocsc(), rhs)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise SolveFailure(f"sparse steady-state solve failed: {exc}") from exc
    return x.reshape(d, d, order="F")


def _solve_splitting(params, drive, cfg):
    d = cfg.dim
    H, a, b = hamiltonian(params, drive, cfg)
    cs = _collapse_ops(params, a, b)
    Heff = -1j * H.toarray() - 0.5 * sum(c.conj().T @ c for c in cs)
    T, Z = sl.schur(Heff, output="complex")
    Zh = Z.conj().T
    ev = np.diag(T)
    gap = np.min(np.abs(ev[:, None] + ev.conj()[None, :]))
    if gap < 1e-12 * max(1.0, np.max(np.abs(ev))):
        raise SolveFailure("undamped subspace: steady state is not unique")

    def fixed_point_map(v):
        R = v.reshape(d, d)
        Q = -(Zh @ sum(c @ R @ c.conj().T for c in cs) @ Z)
        Y, scale, info = ztrsyl(T, T, Q, tranb="C")
        if info < 0:
            raise SolveFailure(f"ztrsyl failed with info={info}")
        return (Z @ (Y / scale) @ Zh).ravel()

    op = LinearOperator((d * d, d * d), matvec=fixed_point_map, dtype=complex)
    # the vacuum projector is annihilated by every jump, so start fully mixed
    v0 = np.eye(d, dtype=complex) / d
    try:
        w, v = eigs(op, k=1, which="LM", v0=v0.ravel(), tol=1e-14, maxiter=5000)
    except (ArpackNoConvergence, ArpackError) as exc:
        raise SolveFailure(f"Arnoldi iteration failed: {exc}") from exc
    if abs(w[0] - 1) > 1e-8:
        raise SolveFailure(f"leading eigenvalue {w[0]:.6g} of the fixed-point map is not 1")
    R = v[:, 0].reshape(d, d)
    return R / np.trace(R)


def lindblad_steady_state(params: DimerParams, drive: Drive, cfg: FockConfig = FockConfig(),
                          method: str = "auto") -> QuantumSteadyState:
    """Steady-state density matrix of the truncated master equation.

    ``method`` is ``"direct"``, ``"splitting"`` or ``"auto"`` (direct up to
    ``DIRECT_MAX_STATES`` product states, splitting above).

    Raises
    ------
    TruncationError
        If more than ``1e-6`` of the population sits in the highest Fock layer
        of either mode.
    SolveFailure
        If the solve fails or returns an invalid density matrix.
    """
    if method == "auto":
        method = "direct" if cfg.dim <= DIRECT_MAX_STATES else "splitting"
    if method == "direct":
        rho = _solve_direct(params, drive, cfg)
    elif method == "splitting":
        rho = _solve_splitting(params, drive, cfg)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(rho)):
        raise SolveFailure("steady-state solve returned non-finite values")
    rho = 0.5 * (rho + rho.conj().T)

    L = liouvillian(params, drive, cfg)
    rate = max(params.kappa_tot_L, params.J, abs(params.U_L), abs(params.U_R),
               abs(params.omega_L - drive.omega_p), abs(params.omega_R - drive.omega_p))
    resid = np.linalg.norm(L @ rho.ravel(order="F")) / rate
    if resid > 1e-8:
        raise SolveFailure(f"Liouvillian residual {resid:.3e} too large")
    tr = np.trace(rho).real
    if abs(tr - 1) > cfg.tol:
        raise SolveFailure(f"trace {tr} deviates from 1")
    ev = np.linalg.eigvalsh(rho)
    if ev.min() < -cfg.tol:
        raise SolveFailure(f"negative eigenvalue {ev.min():.3e}")

    nL, nR = cfg.n_max_L + 1, cfg.n_max_R + 1
    pops = np.real(np.diag(rho)).reshape(nL, nR)
    top = float(max(pops[-1, :].sum(), pops[:, -1].sum()))
    if top > TOP_LAYER_TOL:
        raise TruncationError(f"top Fock layer holds {top:.3e} of the population", top)

    a, b = _ops(cfg)

    def expect(op):
        return complex(np.sum(op.multiply(rho.T)))

    return QuantumSteadyState(rho, expect(a), expect(b), expect(a.getH() @ a).real,
                              expect(b.getH() @ b).real, expect(a @ b), top, cfg)


def oracle_reflection(params: DimerParams, drive: Drive, cfg: FockConfig = FockConfig()) -> complex:
    """``Gamma = 1 - sqrt(kappa) <a_L> / alpha_in`` from the quantum steady state."""
    if drive.alpha_in == 0:
        raise PreconditionViolation("reflection needs a nonzero probe amplitude")
    qs = lindblad_steady_state(params, drive, cfg)
    return 1.0 - math.sqrt(params.kappa) * qs.a_L / drive.alpha_in
