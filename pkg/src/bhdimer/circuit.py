"""Lumped-element circuit to dimer-parameter mapping.

Each resonator is a shunt capacitor ``C_X`` in parallel with an array of
``M`` asymmetric SQUIDs. Lumped formulas used throughout:

    E_J(phi)  = (E_J1 + E_J2) sqrt(cos^2(pi phi) + d^2 sin^2(pi phi))
    L_array   = M Phi0^2 / (4 pi^2 E_J)
    omega_X   = 1 / sqrt(L_array C_X)
    U_X       = -e^2 / (2 C_X) / (hbar M^2)
    J         = C_J omega_0 / (4 C_R)
    kappa     = omega_0^2 C_kappa^2 Z0 / C_L

with ``omega_0`` the geometric mean of the two mode frequencies and ``phi``
in units of the flux quantum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import e as E_CHARGE
from scipy.constants import h as PLANCK
from scipy.constants import hbar as HBAR
from scipy.constants import physical_constants

from .errors import PreconditionViolation, UnphysicalRegime
from .model import TWO_PI, DimerParams

PHI0 = physical_constants["mag. flux quantum"][0]
WEAK_COUPLING_LIMIT = 0.1


@dataclass(frozen=True)
class CircuitParams:
    C_L: float          # F
    C_R: float          # F
    C_J: float          # F
    C_kappa: float      # F
    M: int
    E_J1: float         # J, per junction
    E_J2: float         # J
    Z0: float = 50.0    # Ohm
    phi_ext: float = 0.0  # flux quanta

    def __post_init__(self):
        for name in ("C_L", "C_R", "C_J", "C_kappa", "E_J1", "E_J2", "Z0"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise PreconditionViolation(f"{name} must be positive, got {v}")
        if int(self.M) != self.M or self.M < 1:
            raise PreconditionViolation(f"M must be an integer >= 1, got {self.M}")
        if self.E_J2 < self.E_J1:
            raise PreconditionViolation("convention E_J1 <= E_J2 (asymmetry d in [0, 1))")
        if not np.isfinite(self.phi_ext):
            raise PreconditionViolation("phi_ext must be finite")

    @property
    def asymmetry(self) -> float:
        return (self.E_J2 - self.E_J1) / (self.E_J1 + self.E_J2)

    def with_(self, **changes) -> "CircuitParams":
        return replace(self, **changes)

    # JSON uses explicit units in key names
    _UNITS = {"C_L": ("C_L_fF", 1e-15), "C_R": ("C_R_fF", 1e-15), "C_J": ("C_J_fF", 1e-15),
              "C_kappa": ("C_kappa_fF", 1e-15), "E_J1": ("E_J1_GHz", PLANCK * 1e9),
              "E_J2": ("E_J2_GHz", PLANCK * 1e9), "Z0": ("Z0_Ohm", 1.0), "phi_ext": ("phi_ext_Phi0", 1.0)}

    def to_dict(self) -> dict:
        out = {"M": int(self.M)}
        for name, (key, unit) in self._UNITS.items():
            out[key] = getattr(self, name) / unit
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitParams":
        kw = {"M": int(d["M"])}
        for name, (key, unit) in cls._UNITS.items():
            if key in d:
                kw[name] = float(d[key]) * unit
            elif name not in ("Z0", "phi_ext"):
                raise PreconditionViolation(f"missing circuit key {key!r}")
        return cls(**kw)


def squid_array_energy(E_J1, E_J2, phi_ext):
    """Effective Josephson energy of an asymmetric SQUID at flux ``phi_ext`` (units of Phi0).

    Written as ``sqrt(cos^2 + d^2 sin^2)``, which equals the
    ``|cos| sqrt(1 + d^2 tan^2)`` form but stays finite at half flux.
    """
    tot = E_J1 + E_J2
    d = (E_J2 - E_J1) / tot
    x = np.pi * np.asarray(phi_ext, float)
    out = tot * np.sqrt(np.cos(x) ** 2 + d * d * np.sin(x) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def array_inductance(c: CircuitParams, phi_ext=None):
    ej = squid_array_energy(c.E_J1, c.E_J2, c.phi_ext if phi_ext is None else phi_ext)
    with np.errstate(divide="ignore"):
        return c.M * PHI0 ** 2 / (4 * np.pi ** 2 * np.asarray(ej))


def _mode_frequencies(c: CircuitParams, phi):
    # omega = sqrt(4 pi^2 E_J / (M Phi0^2 C)), finite at a cosine node
    ej = np.asarray(squid_array_energy(c.E_J1, c.E_J2, phi))
    k = 4 * np.pi ** 2 * ej / (c.M * PHI0 ** 2)
    return np.sqrt(k / c.C_L), np.sqrt(k / c.C_R)


def charging_energy(C) -> float:
    """``E_c = e^2 / (2 C)`` in joules."""
    return E_CHARGE ** 2 / (2.0 * C)


def circuit_to_dimer(c: CircuitParams) -> DimerParams:
    """Dimer parameters (rad/s) for a circuit at its external flux.

    Warns with ``UnphysicalRegime`` when ``omega_0 C_kappa Z0`` exceeds 0.1,
    where the weak-coupling decay formula stops being reliable.
    """
    wL, wR = (float(w) for w in _mode_frequencies(c, c.phi_ext))
    w0 = math.sqrt(wL * wR)
    if w0 * c.C_kappa * c.Z0 > WEAK_COUPLING_LIMIT:
        warnings.warn(f"omega_0 C_kappa Z0 = {w0 * c.C_kappa * c.Z0:.3g} > {WEAK_COUPLING_LIMIT}: "
                      "weak-coupling decay formula is outside its range", UnphysicalRegime, stacklevel=2)
    m2 = float(c.M) ** 2
    return DimerParams(
        omega_L=wL,
        omega_R=wR,
        kappa=w0 ** 2 * c.C_kappa ** 2 * c.Z0 / c.C_L,
        J=c.C_J * w0 / (4.0 * c.C_R),
        U_L=-charging_energy(c.C_L) / (HBAR * m2),
        U_R=-charging_energy(c.C_R) / (HBAR * m2),
    )


@dataclass(frozen=True)
class TuningCurve:
    phi: np.ndarray
    omega_L: np.ndarray
    omega_R: np.ndarray

    @property
    def tuning_range(self) -> tuple[float, float]:
        """``max - min`` of each mode frequency over the grid (rad/s)."""
        return float(np.ptp(self.omega_L)), float(np.ptp(self.omega_R))

    def rows(self):
        return list(zip(self.phi.tolist(), self.omega_L.tolist(), self.omega_R.tolist()))


def flux_tuning_curve(c: CircuitParams, phi_grid) -> TuningCurve:
    phi = np.asarray(phi_grid, float)
    if phi.ndim != 1 or len(phi) == 0:
        raise PreconditionViolation("phi_grid must be a non-empty 1-d grid")
    dphi = np.diff(phi)
    if len(phi) > 1 and not (np.all(dphi > 0) or np.all(dphi < 0)):
        raise PreconditionViolation("phi_grid must be strictly monotone")
    wL, wR = _mode_frequencies(c, phi)
    return TuningCurve(phi, np.asarray(wL, float), np.asarray(wR, float))


def design_resonator(f0_hz: float, U_hz: float, M: int) -> tuple[float, float]:
    """Invert the mode formulas for one resonator at zero flux.

    Given the target frequency ``f0_hz`` and Kerr shift ``U_hz`` (both
    ``omega / 2 pi``, ``U_hz < 0``) and the array length ``M``, returns the
    shunt capacitance ``C`` (F) and total SQUID energy ``E_J1 + E_J2`` (J):

        C   = e^2 / (2 h M^2 |U|)
        E_J = M Phi0^2 C (2 pi f0)^2 / (4 pi^2)
    """
    if U_hz >= 0 or f0_hz <= 0 or M < 1:
        raise PreconditionViolation("need f0 > 0, U < 0 and M >= 1")
    C = E_CHARGE ** 2 / (2.0 * PLANCK * M ** 2 * abs(U_hz))
    EJ = M * PHI0 ** 2 * C * (TWO_PI * f0_hz) ** 2 / (4 * np.pi ** 2)
    return C, EJ


def reference_design(f0_hz: float = 7.1e9, U_hz: float = -80e3, M: int = 10, asymmetry: float = 0.5,
                     J_hz: float = 0.25e9, kappa_hz: float = 0.29e9, Z0: float = 50.0) -> CircuitParams:
    """Symmetric dimer hitting the target ``f0``, ``U``, ``J`` and ``kappa`` at zero flux.

    ``C_J`` and ``C_kappa`` follow from inverting the coupling formulas at
    ``omega_0 = 2 pi f0``.
    """
    C, EJ = design_resonator(f0_hz, U_hz, M)
    w0 = TWO_PI * f0_hz
    EJ1 = EJ * (1 - asymmetry) / 2
    EJ2 = EJ * (1 + asymmetry) / 2
    C_J = 4 * C * TWO_PI * J_hz / w0
    C_kappa = math.sqrt(TWO_PI * kappa_hz * C / (w0 ** 2 * Z0))
    return CircuitParams(C_L=C, C_R=C, C_J=C_J, C_kappa=C_kappa, M=M, E_J1=EJ1, E_J2=EJ2, Z0=Z0)


def circuit_summary(c: CircuitParams) -> dict:
    p = circuit_to_dimer(c)
    g = 1 / (TWO_PI * 1e9)
    return {
        "circuit": c.to_dict(),
        "asymmetry": c.asymmetry,
        "dimer": {"omega_L_GHz": p.omega_L * g, "omega_R_GHz": p.omega_R * g, "kappa_GHz": p.kappa * g,
                  "J_GHz": p.J * g, "U_L_kHz": p.U_L / TWO_PI / 1e3, "U_R_kHz": p.U_R / TWO_PI / 1e3},
        "weak_coupling_parameter": math.sqrt(p.omega_L * p.omega_R) * c.C_kappa * c.Z0,
    }


__all__ = ["PHI0", "CircuitParams", "TuningCurve", "squid_array_energy", "array_inductance", "charging_energy",
           "circuit_to_dimer", "flux_tuning_curve", "design_resonator", "reference_design", "circuit_summary"]
