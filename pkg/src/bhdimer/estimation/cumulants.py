"""Heterodyne sampling of two-mode Gaussian states and joint cumulant estimation.

Order tuples ``(n, m, k, l)`` denote the correlator
``<<(a_s^+)^n a_s^m (a_i^+)^k a_i^l>>``; the samples ``z_s, z_i`` stand in for
``a_s, a_i`` and their complex conjugates for the creation operators.
Heterodyne samples carry anti-normally ordered moments, so
``<<z_s^* z_s>> = <a_s^+ a_s> + 1`` while all correlators of total order
three or more vanish for a Gaussian state.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import InsufficientSamples, MissingMoment, UnphysicalCovariance

N_BATCHES = 20
MIN_SAMPLES = 10_000


@dataclass
class QuadratureSamples:
    z_s: np.ndarray
    z_i: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.z_s)

    def to_csv(self, path):
        arr = np.column_stack([self.z_s.real, self.z_s.imag, self.z_i.real, self.z_i.imag])
        np.savetxt(path, arr, delimiter=",", header="re_zp,im_zp,re_zm,im_zm", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path):
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(arr[:, 0] + 1j * arr[:, 1], arr[:, 2] + 1j * arr[:, 3])


@dataclass
class CumulantTable:
    values: dict
    stderr: dict
    n_samples: int = 0

    def __getitem__(self, order):
        return self.values[tuple(order)]

    def orders(self, total=None):
        return [o for o in self.values if total is None or sum(o) == total]

    def significance(self, order) -> float:
        """``|value| / stderr``."""
        return abs(self.values[order]) / self.stderr[order]

    def to_json(self) -> str:
        return json.dumps({
            "n_samples": self.n_samples,
            "cumulants": {",".join(map(str, o)): {"re": v.real, "im": v.imag, "stderr": self.stderr[o]}
                          for o, v in sorted(self.values.items())},
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        vals, errs = {}, {}
        for key, e in d["cumulants"].items():
            o = tuple(int(t) for t in key.split(","))
            vals[o] = complex(e["re"], e["im"])
            errs[o] = float(e["stderr"])
        return cls(vals, errs, d.get("n_samples", 0))


# ---------------------------------------------------------------------------
# set partitions

@lru_cache(maxsize=None)
def set_partitions(n: int):
    """All set partitions of ``range(n)`` as tuples of tuples."""
    if n == 0:
        return ((),)
    out = []
    for smaller in set_partitions(n - 1):
        for i in range(len(smaller)):
            out.append(smaller[:i] + (smaller[i] + (n - 1,),) + smaller[i + 1:])
        out.append(smaller + ((n - 1,),))
    return tuple(out)


def _labels(order):
    return [v for v, c in enumerate(order) for _ in range(c)]


def _block_order(labels, block, nvar):
    o = [0] * nvar
    for pos in block:
        o[labels[pos]] += 1
    return tuple(o)


def all_orders(nvar: int, max_order: int):
    """Order tuples with 1 <= total <= max_order, sorted by total then lexicographically."""
    out = [o for o in itertools.product(range(max_order + 1), repeat=nvar) if 0 < sum(o) <= max_order]
    return sorted(out, key=lambda o: (sum(o), o))


def moments_to_cumulants(moments: dict, max_order: int) -> dict:
    """Joint cumulants from raw moments by the set-partition formula.

    ``kappa(X_1..X_r) = sum_pi (-1)^(|pi|-1) (|pi|-1)! prod_B E[prod_{i in B} X_i]``
    """
    if not moments:
        return {}
    nvar = len(next(iter(moments)))
    out = {}
    for order in all_orders(nvar, max_order):
        labels = _labels(order)
        total = 0.0
        for part in set_partitions(len(labels)):
            b = len(part)
            term = (-1) ** (b - 1) * math.factorial(b - 1)
            for block in part:
                key = _block_order(labels, block, nvar)
                try:
                    term = term * moments[key]
                except KeyError:
                    raise MissingMoment(f"moment {key} required for cumulant {order}") from None
            total = total + term
        out[order] = total
    return out


def cumulants_to_moments(cumulants: dict, max_order: int) -> dict:
    """Inverse of :func:`moments_to_cumulants`: ``E[X_1..X_r] = sum_pi prod_B kappa(B)``."""
    if not cumulants:
        return {}
    nvar = len(next(iter(cumulants)))
    out = {}
    for order in all_orders(nvar, max_order):
        labels = _labels(order)
        total = 0.0
        for part in set_partitions(len(labels)):
            term = 1.0
            for block in part:
                term = term * cumulants[_block_order(labels, block, nvar)]
            total = total + term
        out[order] = total
    return out


def conjugate_order(order):
    n, m, k, l = order
    return (m, n, l, k)


def _enforce_conjugation(table: dict) -> dict:
    out = dict(table)
    for o in table:
        c = conjugate_order(o)
        if o == c:
            out[o] = complex(table[o].real, 0.0)
        elif o < c:
            out[c] = complex(table[o]).conjugate()
    return out


# ---------------------------------------------------------------------------
# sampling

def _symplectic_eigenvalues(V):
    N = V.shape[0] // 2
    Omega = np.kron(np.eye(N), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    return np.sort(np.abs(np.linalg.eigvals(1j * Omega @ V)))[::2]


def _check_covariance(cov):
    cov = np.asarray(cov, float)
    if cov.shape != (4, 4) or not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise UnphysicalCovariance("covariance must be a symmetric 4x4 matrix")
    nu = _symplectic_eigenvalues(0.5 * (cov + cov.T))
    if np.min(nu) < 0.5 - 1e-9:
        raise UnphysicalCovariance(f"symplectic eigenvalue {np.min(nu):.6g} below 1/2")
    return 0.5 * (cov + cov.T)


def heterodyne_covariance(cov, eta: float = 1.0) -> np.ndarray:
    """Quadrature covariance of heterodyne records: ``eta V + (1 - eta)/2 I + 1/2 I``."""
    return eta * np.asarray(cov, float) + (1.0 - eta) / 2 * np.eye(4) + 0.5 * np.eye(4)


def sample_gaussian_output(cov, eta: float, N: int, seed) -> QuadratureSamples:
    """Draw ``N`` heterodyne records of the two-mode Gaussian state with covariance ``cov``.

    ``cov`` is the symmetric-ordered covariance of (X_s, P_s, X_i, P_i) with
    vacuum ``I/2``. Each record is ``z = (x + i p) / sqrt(2)``.
    """
    if not 0 < eta <= 1:
        raise UnphysicalCovariance("eta must lie in (0, 1]")
    V = heterodyne_covariance(_check_covariance(cov), eta)
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(V)
    x = rng.standard_normal((int(N), 4)) @ L.T
    r = 1 / math.sqrt(2)
    return QuadratureSamples((x[:, 0] + 1j * x[:, 1]) * r, (x[:, 2] + 1j * x[:, 3]) * r,
                             {"eta": eta, "seed": seed, "N": int(N)})


def sample_displaced_mixture(cov, displacement: complex, eta: float, N: int, seed) -> QuadratureSamples:
    """Gaussian records whose signal is displaced by ``+/- displacement`` with equal weight.

    A deliberately non-Gaussian control: the signal fourth-order cumulant
    ``<<z_s^* z_s^* z_s z_s>>`` equals ``-2 |displacement|^4``.
    """
    base = sample_gaussian_output(cov, eta, N, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    sign = rng.choice([-1.0, 1.0], size=len(base))
    return QuadratureSamples(base.z_s + sign * displacement, base.z_i,
                             {**base.meta, "displacement": [displacement.real, displacement.imag]})


# ---------------------------------------------------------------------------
# estimation

def _sample_moments(z_s, z_i, orders, n_batches):
    """Per-batch raw moments, shape (n_batches, len(orders)); canonical orders only."""
    pw = {}
    for var, z in enumerate((z_s.conj(), z_s, z_i.conj(), z_i)):
        acc = np.ones_like(z)
        for p in range(1, 5):
            acc = acc * z
            pw[var, p] = acc
    N = len(z_s) - len(z_s) % n_batches
    out = np.empty((n_batches, len(orders)), complex)
    for j, o in enumerate(orders):
        prod = None
        for var, p in enumerate(o):
            if p:
                prod = pw[var, p][:N] if prod is None else prod * pw[var, p][:N]
        out[:, j] = prod.reshape(n_batches, -1).mean(axis=1)
    return out


def estimate_cumulants(samples: QuadratureSamples, max_order: int = 4, n_batches: int = N_BATCHES) -> CumulantTable:
    """Joint cumulants of (z_s^*, z_s, z_i^*, z_i) up to total order ``max_order``.

    Raw moments are averaged in ``n_batches`` equal batches; the estimate uses
    the pooled moments and the standard error is the batch-to-batch spread of
    the per-batch cumulants divided by ``sqrt(n_batches)``.
    """
    N = len(samples)
    if N < MIN_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_SAMPLES} samples, got {N}")
    if max_order > 4:
        raise ValueError("max_order above 4 is not supported")
    orders = all_orders(4, max_order)
    canon = [o for o in orders if o <= conjugate_order(o)]
    batch = _sample_moments(samples.z_s, samples.z_i, canon, n_batches)

    def table(row):
        mom = dict(zip(canon, row))
        for o in canon:
            mom[conjugate_order(o)] = np.conj(mom[o]) if conjugate_order(o) != o else complex(mom[o].real, 0)
        return _enforce_conjugation(moments_to_cumulants(mom, max_order))

    pooled = table(batch.mean(axis=0))
    per_batch = [table(row) for row in batch]
    err = {}
    for o in orders:
        v = np.array([t[o] for t in per_batch])
        err[o] = float(math.sqrt(np.var(v.real, ddof=1) + np.var(v.imag, ddof=1)) / math.sqrt(n_batches))
    return CumulantTable(pooled, err, N)
