"""Parameter records, frame conventions and the linearised drift matrix.

Conventions used throughout the package:

* frequencies are angular (rad/s), rates are energy decay rates (rad/s);
* the rotating frame turns at the pump frequency ``omega_p`` and mode
  detunings are ``delta_X = omega_X - omega_p``;
* the drive detuning quoted for phase diagrams is ``delta = omega_p - omega_0``
  with ``omega_0 = (omega_L + omega_R) / 2``;
* the input field enters as ``+sqrt(kappa) * alpha_in`` and the output is
  ``a_out = a_in - sqrt(kappa) * a_L``;
* ``|alpha_in|**2`` is a photon flux (photons/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import hbar

from .errors import PreconditionViolation

TWO_PI = 2.0 * math.pi

# Relative steady-state residual accepted by drift_matrix and the solvers.
STEADY_RTOL = 1e-9


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def ghz(f_ghz):
    """GHz -> rad/s."""
    return _out(TWO_PI * 1e9 * np.asarray(f_ghz, dtype=float))


def mhz(f_mhz):
    """MHz -> rad/s."""
    return _out(TWO_PI * 1e6 * np.asarray(f_mhz, dtype=float))


def to_ghz(omega):
    return _out(np.asarray(omega, dtype=float) / (TWO_PI * 1e9))


def to_hz(omega):
    return _out(np.asarray(omega, dtype=float) / TWO_PI)


def dbm_to_flux(power_dbm, omega):
    """Photon flux (photons/s) carried by a tone of ``power_dbm`` at angular frequency ``omega``."""
    watts = 10.0 ** ((np.asarray(power_dbm, dtype=float) - 30.0) / 10.0)
    return _out(watts / (hbar * omega))


def flux_to_dbm(flux, omega):
    """Inverse of :func:`dbm_to_flux`; zero flux maps to ``-inf``."""
    watts = np.asarray(flux, dtype=float) * hbar * omega
    with np.errstate(divide="ignore"):
        return _out(10.0 * np.log10(watts) + 30.0)


@dataclass(frozen=True)
class DimerParams:
    """Two Kerr modes coupled by hopping ``J``; only the left mode is driven.

    All entries are in rad/s. ``kappa`` is the external coupling of the left
    mode to the measurement line; the other decay channels default to zero.
    """

    omega_L: float
    omega_R: float
    kappa: float
    J: float
    U_L: float = 0.0
    U_R: float = 0.0
    kappa_R: float = 0.0
    kappa_int_L: float = 0.0
    kappa_int_R: float = 0.0

    def __post_init__(self):
        for name in ("omega_L", "omega_R", "kappa", "J", "U_L", "U_R",
                     "kappa_R", "kappa_int_L", "kappa_int_R"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise PreconditionViolation(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.kappa <= 0:
            raise PreconditionViolation("kappa must be positive")
        if min(self.kappa_R, self.kappa_int_L, self.kappa_int_R) < 0:
            raise PreconditionViolation("loss rates must be non-negative")
        if self.J < 0:
            raise PreconditionViolation("J must be non-negative")

    @property
    def kappa_tot_L(self) -> float:
        return self.kappa + self.kappa_int_L

    @property
    def kappa_tot_R(self) -> float:
        return self.kappa_R + self.kappa_int_R

    @property
    def omega_0(self) -> float:
        return 0.5 * (self.omega_L + self.omega_R)

    @property
    def lossless(self) -> bool:
        """True when the measurement port is the only decay channel."""
        return self.kappa_R == 0 and self.kappa_int_L == 0 and self.kappa_int_R == 0

    def with_(self, **changes) -> "DimerParams":
        return replace(self, **changes)

    @classmethod
    def from_ghz(cls, f_L, f_R, kappa, J, U_L_kHz=0.0, U_R_kHz=0.0, **losses_ghz):
        """Build from ordinary frequencies (GHz, Kerr in kHz)."""
        return cls(
            omega_L=ghz(f_L), omega_R=ghz(f_R), kappa=ghz(kappa), J=ghz(J),
            U_L=TWO_PI * 1e3 * U_L_kHz, U_R=TWO_PI * 1e3 * U_R_kHz,
            **{k: ghz(v) for k, v in losses_ghz.items()},
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Drive:
    """Coherent pump at ``omega_p`` with input amplitude ``alpha_in`` (sqrt(photons/s))."""

    omega_p: float
    alpha_in: complex = 0.0

    def __post_init__(self):
        object.__setattr__(self, "omega_p", float(self.omega_p))
        object.__setattr__(self, "alpha_in", complex(self.alpha_in))
        if not (math.isfinite(self.omega_p) and math.isfinite(abs(self.alpha_in))):
            raise PreconditionViolation("drive must be finite")

    @property
    def flux(self) -> float:
        return abs(self.alpha_in) ** 2

    @property
    def power_watts(self) -> float:
        return hbar * self.omega_p * self.flux

    @classmethod
    def from_flux(cls, omega_p, flux, phase=0.0):
        if flux < 0:
            raise PreconditionViolation("flux must be non-negative")
        return cls(omega_p, math.sqrt(flux) * np.exp(1j * phase))

    @classmethod
    def from_dbm(cls, omega_p, power_dbm, phase=0.0):
        return cls.from_flux(omega_p, dbm_to_flux(power_dbm, omega_p), phase)


def mode_detunings(params: DimerParams, omega_p):
    """(delta_L, delta_R) = (omega_L - omega_p, omega_R - omega_p)."""
    return params.omega_L - omega_p, params.omega_R - omega_p


def drive_detuning(params: DimerParams, omega_p):
    """Drive detuning ``omega_p - omega_0`` used on phase-diagram axes."""
    return omega_p - params.omega_0


def pump_frequency(params: DimerParams, delta):
    """Inverse of :func:`drive_detuning`."""
    return params.omega_0 + delta


def _eom(p: DimerParams, dL, dR, alpha_in, aL, aR):
    nL = aL.real ** 2 + aL.imag ** 2
    nR = aR.real ** 2 + aR.imag ** 2
    fL = (-1j * (dL + p.U_L * nL) - 0.5 * p.kappa_tot_L) * aL - 1j * p.J * aR + math.sqrt(p.kappa) * alpha_in
    fR = (-1j * (dR + p.U_R * nR) - 0.5 * p.kappa_tot_R) * aR - 1j * p.J * aL
    return fL, fR


def equations_of_motion(params: DimerParams, drive: Drive, alpha_L, alpha_R):
    """Time derivatives ``(d alpha_L/dt, d alpha_R/dt)`` of the mean fields in the pump frame."""
    dL, dR = mode_detunings(params, drive.omega_p)
    fL, fR = _eom(params, dL, dR, drive.alpha_in, np.asarray(alpha_L, complex), np.asarray(alpha_R, complex))
    if np.ndim(fL) == 0:
        return complex(fL), complex(fR)
    return fL, fR


def _jacobian(p: DimerParams, dL, dR, aL, aR):
    """Drift matrices for fluctuations (d_L, d_L^+, d_R, d_R^+); broadcasts over leading axes."""
    aL = np.asarray(aL, complex)
    aR = np.asarray(aR, complex)
    shape = np.broadcast(aL, aR, dL, dR).shape
    A = np.zeros(shape + (4, 4), dtype=complex)
    for i, (d, U, k, a) in enumerate(((dL, p.U_L, p.kappa_tot_L, aL), (dR, p.U_R, p.kappa_tot_R, aR))):
        n = a.real ** 2 + a.imag ** 2
        diag = -1j * (d + 2.0 * U * n) - 0.5 * k
        anom = -1j * U * a * a
        A[..., 2 * i, 2 * i] = diag
        A[..., 2 * i, 2 * i + 1] = anom
        A[..., 2 * i + 1, 2 * i + 1] = np.conj(diag)
        A[..., 2 * i + 1, 2 * i] = np.conj(anom)
    A[..., 0, 2] = -1j * p.J
    A[..., 2, 0] = -1j * p.J
    A[..., 1, 3] = 1j * p.J
    A[..., 3, 1] = 1j * p.J
    return A


def residual_scale(p: DimerParams, dL, dR, aL, aR):
    """Characteristic rate times amplitude against which EOM residuals are judged."""
    nL = np.abs(aL) ** 2
    nR = np.abs(aR) ** 2
    rate = np.maximum.reduce([
        np.full(np.shape(nL), p.kappa_tot_L), np.full(np.shape(nL), p.kappa_tot_R),
        np.abs(dL) + 0 * nL, np.abs(dR) + 0 * nL, np.full(np.shape(nL), p.J),
        np.abs(p.U_L) * nL, np.abs(p.U_R) * nR,
    ])
    return rate * np.sqrt(nL + nR)


def steady_residual(params: DimerParams, drive: Drive, alpha_L, alpha_R):
    """Relative residual ``|EOM| / residual_scale`` (0 for the undriven vacuum)."""
    dL, dR = mode_detunings(params, drive.omega_p)
    fL, fR = _eom(params, dL, dR, drive.alpha_in, np.asarray(alpha_L, complex), np.asarray(alpha_R, complex))
    res = np.sqrt(np.abs(fL) ** 2 + np.abs(fR) ** 2)
    scale = residual_scale(params, dL, dR, alpha_L, alpha_R)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), np.where(res > 0, np.inf, 0.0))
    return _out(rel)


@dataclass(frozen=True)
class DriftMatrix:
    """Linearised evolution of (d_L, d_L^+, d_R, d_R^+) around a steady state."""

    matrix: np.ndarray
    alpha_L: complex
    alpha_R: complex
    omega_p: float

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def drift_matrix(params: DimerParams, drive: Drive, ss, rtol: float = STEADY_RTOL) -> DriftMatrix:
    """Bogoliubov drift matrix at the steady state ``ss = (alpha_L, alpha_R)``.

    Raises
    ------
    PreconditionViolation
        If ``ss`` does not satisfy the equations of motion to ``rtol``.
    """
    aL, aR = (complex(ss[0]), complex(ss[1])) if not hasattr(ss, "alpha_L") else (ss.alpha_L, ss.alpha_R)
    rel = steady_residual(params, drive, aL, aR)
    if not rel <= rtol:
        raise PreconditionViolation(f"not a steady state: relative residual {rel:.3e} > {rtol:.1e}")
    dL, dR = mode_detunings(params, drive.omega_p)
    A = _jacobian(params, dL, dR, aL, aR)
    A.setflags(write=False)
    return DriftMatrix(A, aL, aR, drive.omega_p)
