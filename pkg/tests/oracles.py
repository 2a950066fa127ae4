"""Independent reference computations used as test oracles.

Each function re-derives a closed form without calling into the package, so a
test comparing against it checks the implementation rather than itself.
"""

import itertools
import math

import numpy as np
from scipy.constants import hbar


def photon_flux(power_dbm, f_hz):
    return 10 ** ((power_dbm - 30) / 10) / (hbar * 2 * math.pi * f_hz)


def kerr_bistability_window(d, kappa, U):
    """Fluxes bounding the three-solution window of one driven Kerr mode.

    Steady state: ``n ((d + U n)^2 + kappa^2/4) = kappa F`` with ``d`` the
    mode detuning ``omega - omega_p``. The turning points of the left side
    solve ``3 U^2 n^2 + 4 d U n + d^2 + kappa^2/4 = 0``; returns ``None``
    when they are complex or negative.
    """
    disc = d * d - 0.75 * kappa ** 2
    if disc <= 0:
        return None
    roots = [(-2 * d + s * math.sqrt(disc)) / (3 * U) for s in (1, -1)]
    if min(roots) <= 0:
        return None
    F = sorted(n * ((d + U * n) ** 2 + kappa ** 2 / 4) / kappa for n in roots)
    return F[0], F[1]


def linear_amplitudes(wL, wR, kappa_L, kappa_R, J, omega_p, alpha_in, kappa_ext):
    """Mean fields of the linear (U = 0) dimer by solving its 2x2 system."""
    M = np.array([[1j * (wL - omega_p) + kappa_L / 2, 1j * J],
                  [1j * J, 1j * (wR - omega_p) + kappa_R / 2]])
    return np.linalg.solve(M, [math.sqrt(kappa_ext) * alpha_in, 0.0])


def hybrid_frequencies(wL, wR, J):
    m, h = 0.5 * (wL + wR), 0.5 * (wL - wR)
    r = math.sqrt(J * J + h * h)
    return m - r, m + r


def ideal_squeezing(G):
    return (math.sqrt(G) - math.sqrt(G - 1)) ** 2


def reflection_one_mode(w0, kappa, w):
    return (1j * (w0 - w) - kappa / 2) / (1j * (w0 - w) + kappa / 2)


def _pairings(items):
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for p in _pairings(rest):
            yield [(a, items[i])] + p


def wick_moments(second, orders):
    """Raw moments of a zero-mean complex Gaussian vector from its pair correlators.

    ``second[i][j] = E[x_i x_j]``; each moment is a sum over perfect pairings.
    """
    out = {}
    for o in orders:
        labels = [v for v, c in enumerate(o) for _ in range(c)]
        if len(labels) % 2:
            out[o] = 0.0
            continue
        out[o] = sum(np.prod([second[a][b] for a, b in p]) if p else 1.0
                     for p in _pairings([labels[k] for k in range(len(labels))]))
    return out


def bell_number(n):
    row = [1]
    for _ in range(n):
        new = [row[-1]]
        for v in row:
            new.append(new[-1] + v)
        row = new
    return row[0]


def orders_up_to(nvar, max_order):
    return [o for o in itertools.product(range(max_order + 1), repeat=nvar) if 0 < sum(o) <= max_order]
