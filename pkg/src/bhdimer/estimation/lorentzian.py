"""Least-squares Lorentzian line fits for gain curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..errors import FitDiverged, PreconditionViolation


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    peak: float
    baseline: float
    residual: float  # rms of (data - model)

    def __call__(self, x):
        return lorentzian(x, self.center, self.fwhm, self.peak, self.baseline)


def lorentzian(x, center, fwhm, peak, baseline=0.0):
    x = np.asarray(x, float)
    return baseline + peak / (1.0 + 4.0 * (x - center) ** 2 / fwhm ** 2)


def _initial_guess(x, y):
    base = float(np.median(np.concatenate([y[:2], y[-2:]])))
    k = int(np.argmax(y))
    peak = float(y[k] - base)
    half = base + 0.5 * peak
    above = np.nonzero(y >= half)[0]
    width = float(x[above[-1]] - x[above[0]]) if len(above) > 1 else 0.0
    if width <= 0:
        width = float(np.min(np.diff(x))) if len(x) > 1 else 1.0
    return float(x[k]), width, peak, base


def fit_lorentzian(spectrum) -> LorentzianFit:
    """Fit ``y = baseline + peak / (1 + 4 (x - center)^2 / fwhm^2)``.

    ``spectrum`` is an (N, 2) array of (x, y) with N >= 5. Initial values come
    from the maximum and a half-maximum scan. A flat input returns
    ``peak = 0`` with ``fwhm = nan`` instead of raising.
    """
    data = np.asarray(spectrum, float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 5:
        raise PreconditionViolation("need at least 5 (x, y) points")
    data = data[np.argsort(data[:, 0])]
    x, y = data[:, 0], data[:, 1]
    span = float(np.ptp(y))
    if span <= 1e-12 * max(float(np.max(np.abs(y))), 1e-300):
        base = float(np.mean(y))
        return LorentzianFit(float(np.mean(x)), float("nan"), 0.0, base,
                             float(np.sqrt(np.mean((y - base) ** 2))))

    c0, w0, p0, b0 = _initial_guess(x, y)
    xs = float(np.ptp(x)) or 1.0
    ys = span

    def resid(q):
        c, w, p, b = q[0] * xs + c0, q[1] * xs, q[2] * ys, q[3] * ys + b0
        return (lorentzian(x, c, w, p, b) - y) / ys

    def jac(q):
        c, w, p = q[0] * xs + c0, q[1] * xs, q[2] * ys
        u = 4.0 * (x - c) ** 2 / w ** 2
        d = 1.0 / (1.0 + u)
        return np.column_stack([
            p * d * d * 8.0 * (x - c) / w ** 2 * xs / ys,
            p * d * d * 2.0 * u / w * xs / ys,
            d,
            np.ones_like(x),
        ])

    q0 = np.array([0.0, w0 / xs, p0 / ys, 0.0])
    sol = least_squares(resid, q0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    c, w, p, b = sol.x[0] * xs + c0, abs(sol.x[1]) * xs, sol.x[2] * ys, sol.x[3] * ys + b0
    if not np.all(np.isfinite([c, w, p, b])):
        raise FitDiverged("Lorentzian fit produced non-finite parameters")
    rms = float(np.sqrt(np.mean((lorentzian(x, c, w, p, b) - y) ** 2)))
    rms0 = float(np.sqrt(np.mean((lorentzian(x, c0, w0, p0, b0) - y) ** 2)))
    if rms > rms0 * (1 + 1e-12) + 1e-300:
        raise FitDiverged("Lorentzian fit did not reduce the residual")
    return LorentzianFit(float(c), float(w), float(p), float(b), rms)
