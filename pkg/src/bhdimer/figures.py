"""Data behind each published figure, at desk-scale resolution.

Every recipe returns a :class:`FigureData` holding CSV tables and a JSON
summary; nothing here plots. Two parameter sets are used throughout:

* ``FIT_SET``: the mode frequencies, linewidth and hopping extracted from the
  reflection fit, (7.0, 7.2, 0.29, 0.25) GHz, with U/2pi = -80 kHz.
* ``DIAGRAM_SET``: a symmetric dimer at 7.1 GHz with J = 0.7 kappa, used for
  the phase diagram.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .circuit import circuit_to_dimer, flux_tuning_curve, reference_design
from .errors import UnphysicalRegime
from .estimation.cumulants import estimate_cumulants, sample_gaussian_output
from .estimation.reflection import phase_winding, reflection_model
from .fluctuations import (
    gain_operating_point,
    gain_spectrum,
    output_covariance,
    squeezing_extrema,
    squeezing_spectrum,
    squeezing_vs_phase,
    symplectic_eigenvalues,
)
from .model import TWO_PI, DimerParams, flux_to_dbm, ghz, pump_frequency
from .semiclassical import phase_diagram, vanishing_left_locus

FIGURES = ("1c", "2c", "2d", "3a", "3bc", "4a", "4b", "4c")

FIT_SET = DimerParams.from_ghz(7.0, 7.2, 0.29, 0.25, U_L_kHz=-80.0, U_R_kHz=-80.0)
DIAGRAM_SET = DimerParams.from_ghz(7.1, 7.1, 0.29, 0.7 * 0.29, U_L_kHz=-80.0, U_R_kHz=-80.0)

# pump detunings (units of kappa) of the two amplifier operating points
DEGENERATE_DELTA = 0.3
NONDEGENERATE_DELTA = -1.5


@dataclass
class FigureData:
    name: str
    tables: dict = field(default_factory=dict)   # filename -> (header, rows)
    summary: dict = field(default_factory=dict)


def _hz(omega):
    return np.asarray(omega, float) / TWO_PI


def _db(x):
    return 10.0 * np.log10(x)


def _op_summary(op) -> dict:
    return {
        "omega_p_Hz": _hz(op.omega_p),
        "flux_per_us": op.flux / 1e6,
        "power_dBm": flux_to_dbm(op.flux, op.omega_p),
        "peak_gain_dB": _db(op.peak.gain),
        "peak_Delta_Hz": _hz(op.peak.Delta),
        "fwhm_Hz": _hz(op.peak.fwhm),
        "gain_bandwidth_Hz": _hz(op.peak.gain_bandwidth_product),
        "predicted_gain_bandwidth_Hz": _hz(op.critical.gain_bandwidth),
        "threshold_flux_per_us": op.threshold_flux / 1e6,
        "threshold_kind": op.threshold_kind,
        "n_L": op.steady_state.n_L,
        "n_R": op.steady_state.n_R,
    }


def fig_1c(n_delta: int = 121, n_flux: int = 121, threads: int = 1) -> FigureData:
    """S/M/P classification over (pump detuning, input flux) for J = 0.7 kappa, U < 0."""
    p = DIAGRAM_SET
    k = p.kappa
    fmax = 0.6 * k ** 2 / abs(p.U_L)
    delta = np.linspace(-2.5 * k, 1.5 * k, n_delta)
    flux = np.linspace(0.0, fmax, n_flux)
    pd = phase_diagram(p, delta, flux, threads=threads)
    rows = []
    for i, d in enumerate(delta):
        wp = pump_frequency(p, d)
        for j, F in enumerate(flux):
            rows.append((_hz(d), F / 1e6, flux_to_dbm(F, wp) if F > 0 else "-inf", pd.region[i, j],
                         int(pd.n_solutions[i, j]), int(pd.n_stable[i, j]), int(pd.ambiguous[i, j]),
                         pd.error[i, j] or ""))
    locus = []
    for d in delta:
        F = vanishing_left_locus(p, d)
        if F is not None and F <= fmax:
            locus.append((_hz(d), F / 1e6))
    out = FigureData("1c")
    out.tables["fig1c_phase_diagram.csv"] = (
        ["delta_Hz", "flux_per_us", "power_dBm", "region", "n_solutions", "n_stable", "ambiguous", "error"], rows)
    out.tables["fig1c_left_node_locus.csv"] = (["delta_Hz", "flux_per_us"], locus)
    out.summary = {"counts": pd.counts(), "J_over_kappa": p.J / k, "U_over_kappa": p.U_L / k}
    return out


def fig_2c(n: int = 2001) -> FigureData:
    """Reflection coefficient across both hybridized resonances (lossless, weak probe)."""
    p = FIT_SET
    w = ghz(np.linspace(6.0, 8.2, n))
    g = reflection_model(p, w)
    rows = [(f, z.real, z.imag, abs(z), math.atan2(z.imag, z.real)) for f, z in zip(_hz(w), g)]
    out = FigureData("2c")
    out.tables["fig2c_reflection.csv"] = (["freq_Hz", "re_gamma", "im_gamma", "abs_gamma", "phase_rad"], rows)
    out.summary = {"winding_over_2pi": phase_winding(g) / TWO_PI,
                   "max_abs_deviation": float(np.max(np.abs(np.abs(g) - 1)))}
    return out


def fig_2d(n_phi: int = 51, n_freq: int = 331) -> FigureData:
    """Flux tuning of both modes and the reflection phase map for the reference circuit."""
    c = reference_design()
    phi = np.linspace(0.0, 0.5, n_phi)
    curve = flux_tuning_curve(c, phi)
    freqs = ghz(np.linspace(4.5, 7.8, n_freq))
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnphysicalRegime)
        for ph in phi:
            p = circuit_to_dimer(c.with_(phi_ext=float(ph)))
            g = reflection_model(p, freqs)
            rows.extend((float(ph), f, a) for f, a in zip(_hz(freqs), np.angle(g)))
    out = FigureData("2d")
    out.tables["fig2d_tuning_curve.csv"] = (
        ["phi_Phi0", "f_L_Hz", "f_R_Hz"], [(a, _hz(b), _hz(d)) for a, b, d in curve.rows()])
    out.tables["fig2d_phase_map.csv"] = (["phi_Phi0", "freq_Hz", "phase_rad"], rows)
    span = curve.tuning_range
    out.summary = {"tuning_span_Hz": [_hz(span[0]), _hz(span[1])], "circuit": c.to_dict()}
    return out


def _gain_rows(op, Delta, label):
    gs = gain_spectrum(op.steady_state, op.params, Delta)
    rows = [(label, D, _hz(op.omega_p + d), a, _db(a), b, _db(b) if b > 0 else "-inf")
            for D, d, a, b in zip(_hz(Delta), Delta, gs.G_s, gs.G_i)]
    fit = gs.fit
    return rows, {"center_Hz": _hz(fit.center), "fwhm_Hz": _hz(fit.fwhm), "peak": fit.peak,
                  "baseline": fit.baseline, "rms_residual": fit.residual}


_GAIN_HEADER = ["setting", "Delta_Hz", "signal_Hz", "G_s_linear", "G_s_dB", "G_i_linear", "G_i_dB"]


def fig_3a(gains_dB=(15.0, 20.0), n: int = 301) -> FigureData:
    """Degenerate gain (pump near a hybridized mode, gain centred on the pump)."""
    p = FIT_SET
    rows, ops = [], []
    for g in gains_dB:
        op = gain_operating_point(p, DEGENERATE_DELTA * p.kappa, g)
        Delta = np.linspace(-4 * op.peak.fwhm, 4 * op.peak.fwhm, n)
        r, fit = _gain_rows(op, Delta, f"{g:g}dB")
        rows += r
        ops.append({**_op_summary(op), "lorentzian": fit})
    out = FigureData("3a")
    out.tables["fig3a_degenerate_gain.csv"] = (_GAIN_HEADER, rows)
    out.summary = {"operating_points": ops}
    return out


def fig_3bc(gains_dB=(10.0, 15.0, 20.0, 25.0), n: int = 301) -> FigureData:
    """Nondegenerate gain: signal near one hybridized mode, idler near the other."""
    p = FIT_SET
    rows, ops = [], []
    for g in gains_dB:
        op = gain_operating_point(p, NONDEGENERATE_DELTA * p.kappa, g)
        c, w = op.peak.Delta, 4 * op.peak.fwhm
        fits = {}
        for band, D in (("signal", np.linspace(c - w, c + w, n)), ("idler", np.linspace(-c - w, -c + w, n))):
            r, fits[band] = _gain_rows(op, D, f"{g:g}dB/{band}")
            rows += r
        ops.append({**_op_summary(op), "lorentzian_signal": fits["signal"], "lorentzian_idler": fits["idler"]})
    out = FigureData("3bc")
    out.tables["fig3bc_nondegenerate_gain.csv"] = (_GAIN_HEADER, rows)
    out.summary = {"operating_points": ops}
    return out


def _squeezing_point(gain_dB=20.0):
    p = FIT_SET
    return gain_operating_point(p, NONDEGENERATE_DELTA * p.kappa, gain_dB)


def fig_4a(gain_dB: float = 20.0, n: int = 401) -> FigureData:
    """Two-mode squeezing spectra for a set of LO phases around the optimum."""
    op = _squeezing_point(gain_dB)
    c = op.peak.Delta
    *_, phi0 = squeezing_extrema(op.steady_state, op.params, c)
    phis = phi0 + np.array([0.0, 1.0, 2.0, 3.0, 4.0]) * math.pi / 8
    Delta = np.linspace(c - 6 * op.peak.fwhm, c + 6 * op.peak.fwhm, n)
    sp = squeezing_spectrum(op.steady_state, op.params, Delta, phis)
    rows = [(_hz(D), sp.values[i, j], sp.dB[i, j], phis[j])
            for j in range(len(phis)) for i, D in enumerate(Delta)]
    out = FigureData("4a")
    out.tables["fig4a_squeezing_spectrum.csv"] = (["Delta_Hz", "value_linear", "value_dB", "phi_rad"], rows)
    out.summary = {"operating_point": _op_summary(op), "phi_min_rad": phi0,
                   "min_dB": float(np.min(sp.dB)), "max_dB": float(np.max(sp.dB))}
    return out


def ideal_squeezing(G):
    """Best two-mode squeezing of an ideal phase-preserving amplifier with gain ``G``."""
    G = np.asarray(G, float)
    return (np.sqrt(G) - np.sqrt(G - 1.0)) ** 2


def gain_for_squeezing(S):
    """Inverse of :func:`ideal_squeezing`: ``sqrt(G) = (x + 1/x) / 2`` with ``x = sqrt(S)``."""
    x = np.sqrt(np.asarray(S, float))
    return ((x + 1 / x) / 2) ** 2


def fig_4b(gain_dB: float = 20.0, model_gains_dB=(4.0, 6.0, 9.0, 12.0, 15.0, 20.0)) -> FigureData:
    """Squeezing versus LO phase at one sideband, plus best squeezing versus gain."""
    op = _squeezing_point(gain_dB)
    phi = np.linspace(0, math.pi, 181)
    sl = squeezing_vs_phase(op.steady_state, op.params, op.peak.Delta, phi)
    ideal = [(g, _db(ideal_squeezing(10 ** (g / 10)))) for g in np.linspace(0.0, 20.0, 201)]
    model = []
    for g in model_gains_dB:
        o = _squeezing_point(g)
        smin, smax, _ = squeezing_extrema(o.steady_state, o.params, o.peak.Delta)
        model.append((g, _db(smin), _db(smax), _db(ideal_squeezing(o.peak.gain))))
    out = FigureData("4b")
    out.tables["fig4b_phase_slice.csv"] = (["phi_rad", "value_linear", "value_dB", "fit_linear"],
                                           [(a, b, _db(b), sl.model(a)) for a, b in zip(phi, sl.values)])
    out.tables["fig4b_ideal_curve.csv"] = (["gain_dB", "S_min_dB"], ideal)
    out.tables["fig4b_model_points.csv"] = (["gain_dB", "S_min_dB", "S_max_dB", "S_min_ideal_dB"], model)
    out.summary = {"operating_point": _op_summary(op),
                   "fit": {"c0": sl.c0, "c1": sl.c1, "c2": sl.c2, "max_rel_residual": sl.residual},
                   "gain_at_minus_12dB_dB": float(_db(gain_for_squeezing(10 ** -1.2)))}
    return out


def fig_4c(gain_dB: float = 20.0, n_samples: int = 1_000_000, eta: float = 1.0, seed: int = 20140101,
           band_fraction: float = 0.25) -> FigureData:
    """Cumulants of band-filtered heterodyne records at the nondegenerate operating point."""
    op = _squeezing_point(gain_dB)
    bw = band_fraction * op.peak.fwhm
    V = output_covariance(op.steady_state, op.params, op.omega_p + op.peak.Delta, op.omega_p - op.peak.Delta, bw)
    samples = sample_gaussian_output(V, eta, n_samples, seed)
    tab = estimate_cumulants(samples)
    rows = [(*o, tab.values[o].real, tab.values[o].imag, tab.stderr[o], tab.significance(o))
            for o in sorted(tab.values, key=lambda o: (sum(o), o))]
    out = FigureData("4c")
    out.tables["fig4c_cumulants.csv"] = (["n", "m", "k", "l", "re", "im", "stderr", "significance"], rows)
    out.summary = {"operating_point": _op_summary(op), "bandwidth_Hz": _hz(bw), "eta": eta, "seed": seed,
                   "n_samples": n_samples, "covariance": V,
                   "symplectic_eigenvalues": symplectic_eigenvalues(V)}
    return out


RECIPES = {"1c": fig_1c, "2c": fig_2c, "2d": fig_2d, "3a": fig_3a, "3bc": fig_3bc,
           "4a": fig_4a, "4b": fig_4b, "4c": fig_4c}


def figure(name: str, **kw) -> FigureData:
    if name not in RECIPES:
        raise KeyError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    return RECIPES[name](**kw)
