import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bhdimer.model import DimerParams, Drive  # noqa: E402
from bhdimer.semiclassical import solve_steady_states  # noqa: E402


def random_params(rng, lossless=True, kerr=True):
    """Dimensionless dimer with kappa = 1 and hopping of order kappa."""
    kw = {}
    if not lossless:
        kw = dict(kappa_R=rng.uniform(0, 0.3), kappa_int_L=rng.uniform(0, 0.2), kappa_int_R=rng.uniform(0, 0.2))
    U = (-rng.uniform(1e-3, 5e-2), -rng.uniform(1e-3, 5e-2)) if kerr else (0.0, 0.0)
    return DimerParams(omega_L=100 + rng.uniform(-1, 1), omega_R=100 + rng.uniform(-1, 1), kappa=1.0,
                       J=rng.uniform(0.2, 1.5), U_L=U[0], U_R=U[1], **kw)


def random_stable_point(rng, lossless=True, tries=200):
    """(params, drive, steady state) with a pumped, stable solution."""
    for _ in range(tries):
        p = random_params(rng, lossless)
        drive = Drive(p.omega_0 + rng.uniform(-2.5, 2.0),
                      math.sqrt(rng.uniform(0.01, 0.5) / abs(p.U_L)) * np.exp(1j * rng.uniform(0, 2 * math.pi)))
        stable = [s for s in solve_steady_states(p, drive) if s.stable and s.n_L + s.n_R > 1e-3]
        if stable:
            return p, drive, stable[rng.integers(len(stable))]
    raise RuntimeError("no stable point found")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
