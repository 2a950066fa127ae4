"""Command-line front end: ``bhdimer <subcommand> [--config cfg.json] [--out-dir DIR]``.

Every subcommand reads a JSON config whose keys carry their units
(``_GHz`` for ordinary frequencies, ``_kHz``, ``_MHz``, ``_dBm``,
``_per_us`` for photons per microsecond). Without ``--config`` the bundled
example for that subcommand is used. Outputs are CSV/JSON files in
``--out-dir`` plus a ``<subcommand>.manifest.json`` echoing the resolved
configuration; only the manifest carries a timestamp.

Exit codes: 0 success, 1 domain error (message names the error class),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CircuitParams, circuit_summary, flux_tuning_curve, reference_design
from .errors import DimerError, UnphysicalRegime
from .estimation.cumulants import QuadratureSamples, estimate_cumulants, sample_gaussian_output
from .estimation.reflection import ReflectionTrace, fit_reflection, phase_winding, reflection_model, synthetic_trace
from .fluctuations import (
    gain_operating_point,
    gain_spectrum,
    output_covariance,
    squeezing_spectrum,
    symplectic_eigenvalues,
)
from .fock import FockConfig, lindblad_steady_state
from .figures import FIGURES, figure
from .io import (
    ConfigError,
    dimer_from_config,
    dimer_to_config,
    drive_from_config,
    grid_from_config,
    write_csv,
    write_json,
    write_manifest,
)
from .model import TWO_PI, flux_to_dbm, ghz, mhz, pump_frequency
from .semiclassical import classify_phase, lower_branch, phase_diagram, shifted_eigenfrequencies

SUBCOMMANDS = ("steady-state", "phase-diagram", "gain", "squeezing", "reflection", "fit-reflection",
               "circuit", "cumulants", "oracle", "figure")


def _hz(omega):
    return np.asarray(omega, float) / TWO_PI


def _db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


# ---------------------------------------------------------------------------
# config handling

def bundled_config_path(subcommand: str) -> Path:
    return Path(str(resources.files("bhdimer") / "data" / f"{subcommand.replace('-', '_')}.json"))


def _load_config(args):
    path = Path(args.config) if args.config else bundled_config_path(args.command)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, path.parent


def _block(cfg, key):
    if key not in cfg or not isinstance(cfg[key], dict):
        raise ConfigError(f"config needs a {key!r} object")
    return cfg[key]


def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else base / p


def _state(cfg):
    """Dimer, pump frequency and steady state from either an explicit drive or a gain operating point."""
    p = dimer_from_config(_block(cfg, "dimer"))
    if "operating_point" in cfg:
        op_cfg = cfg["operating_point"]
        op = gain_operating_point(p, float(op_cfg["delta_over_kappa"]) * p.kappa, float(op_cfg["gain_dB"]))
        return p, op.drive, op.steady_state, op
    drive = drive_from_config(_block(cfg, "drive"), p)
    branch = cfg.get("branch", "low")
    sols = [s for s in classify_phase(p, drive).solutions if s.stable]
    if not sols:
        from .errors import PreconditionViolation
        raise PreconditionViolation("no stable steady state at this drive")
    ss = min(sols, key=lambda s: s.n_L) if branch == "low" else max(sols, key=lambda s: s.n_L)
    return p, drive, ss, None


def _provenance(p, drive, ss):
    return {"dimer": dimer_to_config(p),
            "pump": {"omega_p_Hz": _hz(drive.omega_p), "flux_per_us": drive.flux / 1e6,
                     "power_dBm": flux_to_dbm(drive.flux, drive.omega_p) if drive.flux > 0 else None},
            "steady_state": ss.to_dict()}


# ---------------------------------------------------------------------------
# subcommands; each returns (artifacts, resolved config, stdout summary)

def cmd_steady_state(cfg, base, args):
    p = dimer_from_config(_block(cfg, "dimer"))
    drive = drive_from_config(_block(cfg, "drive"), p)
    pt = classify_phase(p, drive)
    sols = []
    for s in pt.solutions:
        d = s.to_dict()
        if s.stable:
            d["shifted_eigenfrequencies_Hz"] = list(_hz(shifted_eigenfrequencies(s, drive.omega_p)))
        sols.append(d)
    res = {"region": pt.region, "ambiguous": pt.ambiguous, "delta_Hz": _hz(pt.delta),
           "flux_per_us": drive.flux / 1e6, "solutions": sols}
    path = write_json(args.out_dir / "steady_state.json", res)
    return [path], cfg, {"region": pt.region, "n_solutions": len(sols)}


def cmd_phase_diagram(cfg, base, args):
    p = dimer_from_config(_block(cfg, "dimer"))
    delta = ghz(grid_from_config(_block(cfg, "delta_GHz"), "delta_GHz"))
    flux = grid_from_config(_block(cfg, "flux_per_us"), "flux_per_us") * 1e6
    pd = phase_diagram(p, delta, flux, threads=args.threads)
    rows = []
    for i, d in enumerate(delta):
        wp = pump_frequency(p, d)
        for j, F in enumerate(flux):
            rows.append((_hz(d), F / 1e6, flux_to_dbm(F, wp) if F > 0 else "-inf", pd.region[i, j],
                         int(pd.n_solutions[i, j]), int(pd.n_stable[i, j]), int(pd.ambiguous[i, j]),
                         pd.error[i, j] or ""))
    a = write_csv(args.out_dir / "phase_diagram.csv",
                  ["delta_Hz", "flux_per_us", "power_dBm", "region", "n_solutions", "n_stable", "ambiguous", "error"],
                  rows)
    b = write_json(args.out_dir / "phase_diagram.json", {"dimer": dimer_to_config(p), "counts": pd.counts(),
                                                         "shape": [len(delta), len(flux)]})
    return [a, b], cfg, pd.counts()


def cmd_gain(cfg, base, args):
    p, drive, ss, op = _state(cfg)
    Delta = mhz(grid_from_config(_block(cfg, "Delta_MHz"), "Delta_MHz"))
    gs = gain_spectrum(ss, p, Delta, fit=len(Delta) >= 5)
    rows = [(_hz(d), _hz(drive.omega_p + d), _hz(drive.omega_p - d), a, _db(a), b, _db(b))
            for d, a, b in zip(Delta, gs.G_s, gs.G_i)]
    a = write_csv(args.out_dir / "gain.csv",
                  ["Delta_Hz", "signal_Hz", "idler_Hz", "G_s_linear", "G_s_dB", "G_i_linear", "G_i_dB"], rows)
    res = _provenance(p, drive, ss)
    if gs.fit is not None:
        f = gs.fit
        res["lorentzian"] = {"center_Hz": _hz(f.center), "fwhm_Hz": _hz(f.fwhm), "peak": f.peak,
                             "baseline": f.baseline, "rms_residual": f.residual}
        res["gain_bandwidth_Hz"] = _hz(gs.gain_bandwidth_product)
    if op is not None:
        res["exact_peak"] = {"Delta_Hz": _hz(op.peak.Delta), "gain_dB": _db(op.peak.gain),
                             "fwhm_Hz": _hz(op.peak.fwhm), "gain_bandwidth_Hz": _hz(op.peak.gain_bandwidth_product),
                             "predicted_gain_bandwidth_Hz": _hz(op.critical.gain_bandwidth)}
    b = write_json(args.out_dir / "gain.json", res)
    return [a, b], cfg, {"max_G_s_dB": float(_db(np.max(gs.G_s)))}


def cmd_squeezing(cfg, base, args):
    p, drive, ss, op = _state(cfg)
    Delta = mhz(grid_from_config(_block(cfg, "Delta_MHz"), "Delta_MHz"))
    phi = grid_from_config(_block(cfg, "phi_rad"), "phi_rad")
    eta = float(cfg.get("eta", 1.0))
    sp = squeezing_spectrum(ss, p, Delta, phi, eta)
    rows = [(_hz(D), sp.values[i, j], sp.dB[i, j], phi[j]) for j in range(len(phi)) for i, D in enumerate(Delta)]
    a = write_csv(args.out_dir / "squeezing.csv", ["Delta_Hz", "value_linear", "value_dB", "phi_rad"], rows)
    res = {**_provenance(p, drive, ss), "eta": eta, "min_dB": float(np.min(sp.dB)), "max_dB": float(np.max(sp.dB))}
    b = write_json(args.out_dir / "squeezing.json", res)
    return [a, b], cfg, {"min_dB": res["min_dB"], "max_dB": res["max_dB"]}


def cmd_reflection(cfg, base, args):
    p = dimer_from_config(_block(cfg, "dimer"))
    w = ghz(grid_from_config(_block(cfg, "freq_GHz"), "freq_GHz"))
    noise = math.radians(float(cfg.get("phase_noise_deg", 0.0)))
    seed = cfg.get("seed", args.seed)
    g = reflection_model(p, w)
    path = args.out_dir / "reflection.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    if noise > 0:
        synthetic_trace(p, w, noise, seed).to_csv(path)
    else:
        ReflectionTrace(w, gamma=g).to_csv(path)
    b = write_json(args.out_dir / "reflection.json",
                   {"dimer": dimer_to_config(p), "phase_noise_rad": noise, "seed": seed,
                    "winding_over_2pi": phase_winding(g) / TWO_PI,
                    "max_abs_deviation": float(np.max(np.abs(np.abs(g) - 1)))})
    return [path, b], {**cfg, "seed": seed}, {"winding_over_2pi": phase_winding(g) / TWO_PI}


def cmd_fit_reflection(cfg, base, args):
    trace_path = Path(args.trace) if args.trace else _resolve(base, str(cfg.get("trace", "")))
    if not trace_path.is_file():
        raise ConfigError(f"trace file not found: {trace_path}")
    trace = ReflectionTrace.from_csv(trace_path)
    guess = dimer_from_config(_block(cfg, "initial_guess"))
    fr = fit_reflection(trace, guess, multistart=bool(cfg.get("multistart", True)))
    res = fr.to_dict()
    res["trace"] = trace_path.name
    a = write_json(args.out_dir / "fit_reflection.json", res)
    keys = ("omega_L_GHz", "omega_R_GHz", "kappa_GHz", "J_GHz")
    return [a], cfg, {k: res[k] for k in keys}


def cmd_circuit(cfg, base, args):
    if "circuit" in cfg:
        c = CircuitParams.from_dict(cfg["circuit"])
    elif "reference_design" in cfg:
        r = cfg["reference_design"]
        c = reference_design(f0_hz=float(r.get("f0_GHz", 7.1)) * 1e9, U_hz=float(r.get("U_kHz", -80.0)) * 1e3,
                             M=int(r.get("M", 10)), asymmetry=float(r.get("asymmetry", 0.5)),
                             J_hz=float(r.get("J_GHz", 0.25)) * 1e9, kappa_hz=float(r.get("kappa_GHz", 0.29)) * 1e9)
    else:
        raise ConfigError("circuit config needs 'circuit' or 'reference_design'")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnphysicalRegime)
        summary = circuit_summary(c)
    summary["warnings"] = [f"{w.category.__name__}: {w.message}" for w in caught]
    for w in caught:
        print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)
    phi = grid_from_config(cfg.get("phi_Phi0", {"start": 0.0, "stop": 0.5, "num": 101}), "phi_Phi0")
    curve = flux_tuning_curve(c, phi)
    span = curve.tuning_range
    summary["tuning_span_GHz"] = [span[0] / (TWO_PI * 1e9), span[1] / (TWO_PI * 1e9)]
    a = write_json(args.out_dir / "circuit.json", summary)
    b = write_csv(args.out_dir / "tuning_curve.csv", ["phi_Phi0", "f_L_Hz", "f_R_Hz"],
                  [(x, _hz(l), _hz(r)) for x, l, r in curve.rows()])
    return [a, b], cfg, summary["dimer"]


def cmd_cumulants(cfg, base, args):
    seed = cfg.get("seed", args.seed)
    meta = {}
    if "samples" in cfg:
        samples = QuadratureSamples.from_csv(_resolve(base, cfg["samples"]))
    else:
        n = int(cfg.get("n_samples", 1_000_000))
        eta = float(cfg.get("eta", 1.0))
        if "covariance" in cfg:
            V = np.asarray(cfg["covariance"], float)
        else:
            p, drive, ss, op = _state(cfg)
            if op is None:
                raise ConfigError("cumulants from a device needs an 'operating_point' block")
            bw = mhz(float(cfg.get("bandwidth_MHz", 1.0)))
            V = output_covariance(ss, p, drive.omega_p + op.peak.Delta, drive.omega_p - op.peak.Delta, bw)
            meta["operating_point"] = _provenance(p, drive, ss)
        samples = sample_gaussian_output(V, eta, n, seed)
        meta.update({"covariance": V, "symplectic_eigenvalues": symplectic_eigenvalues(V), "eta": eta,
                     "n_samples": n, "seed": seed})
        if cfg.get("write_samples"):
            samples.to_csv(args.out_dir / "samples.csv")
    tab = estimate_cumulants(samples, n_batches=int(cfg.get("n_batches", 20)))
    a = args.out_dir / "cumulants.json"
    a.parent.mkdir(parents=True, exist_ok=True)
    a.write_text(tab.to_json() + "\n")
    rows = [(*o, tab.values[o].real, tab.values[o].imag, tab.stderr[o], tab.significance(o))
            for o in sorted(tab.values, key=lambda o: (sum(o), o))]
    b = write_csv(args.out_dir / "cumulants.csv", ["n", "m", "k", "l", "re", "im", "stderr", "significance"], rows)
    arts = [a, b]
    if meta:
        arts.append(write_json(args.out_dir / "cumulants_meta.json", meta))
    if cfg.get("write_samples"):
        arts.append(args.out_dir / "samples.csv")
    high = max(tab.significance(o) for o in tab.orders() if sum(o) >= 3)
    return arts, {**cfg, "seed": seed}, {"max_significance_order_3_4": high,
                                         "significance_0101": tab.significance((0, 1, 0, 1))}


def cmd_oracle(cfg, base, args):
    p = dimer_from_config(_block(cfg, "dimer"))
    drive = drive_from_config(_block(cfg, "drive"), p)
    t = cfg.get("truncation", {})
    fc = FockConfig(int(t.get("n_max_L", 12)), int(t.get("n_max_R", 12)))
    qs = lindblad_steady_state(p, drive, fc, method=cfg.get("method", "auto"))
    res = {"a_L": qs.a_L, "a_R": qs.a_R, "n_L": qs.n_L, "n_R": qs.n_R, "a_L_a_R": qs.a_L_a_R,
           "top_population": qs.top_population, "truncation": [fc.n_max_L, fc.n_max_R]}
    if drive.alpha_in != 0:
        res["reflection"] = 1.0 - math.sqrt(p.kappa) * qs.a_L / drive.alpha_in
    ss = lower_branch(p, drive)
    res["semiclassical"] = {"alpha_L": ss.alpha_L, "alpha_R": ss.alpha_R, "n_L": ss.n_L, "n_R": ss.n_R}
    if ss.alpha_L != 0:
        res["relative_difference_a_L"] = abs(qs.a_L - ss.alpha_L) / abs(ss.alpha_L)
    a = write_json(args.out_dir / "oracle.json", res)
    return [a], cfg, {"n_L": qs.n_L, "top_population": qs.top_population}


def cmd_figure(cfg, base, args):
    fig = figure(args.name, threads=args.threads) if args.name == "1c" else figure(args.name)
    arts = [write_csv(args.out_dir / fname, header, rows) for fname, (header, rows) in fig.tables.items()]
    arts.append(write_json(args.out_dir / f"fig{args.name}_summary.json", fig.summary))
    return arts, {"figure": args.name}, {"figure": args.name, "files": [a.name for a in arts]}


COMMANDS = {"steady-state": cmd_steady_state, "phase-diagram": cmd_phase_diagram, "gain": cmd_gain,
            "squeezing": cmd_squeezing, "reflection": cmd_reflection, "fit-reflection": cmd_fit_reflection,
            "circuit": cmd_circuit, "cumulants": cmd_cumulants, "oracle": cmd_oracle, "figure": cmd_figure}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (default: bundled example for the subcommand)")
    common.add_argument("--out-dir", default=".", type=Path, help="directory for CSV/JSON outputs")
    common.add_argument("--threads", type=int, default=1, help="worker threads for grid scans")
    common.add_argument("--seed", type=int, default=12345, help="RNG seed when the config gives none")

    parser = argparse.ArgumentParser(prog="bhdimer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bhdimer {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", required=True)
    helps = {
        "steady-state": "all classical steady states at one drive, with stability",
        "phase-diagram": "S/M/P classification over a (detuning, flux) grid",
        "gain": "signal and idler gain spectra around a stable state",
        "squeezing": "two-mode squeezing spectra versus sideband detuning and LO phase",
        "reflection": "weak-probe reflection trace (optionally a noisy synthetic phase trace)",
        "fit-reflection": "fit mode frequencies, linewidth and hopping to a phase trace",
        "circuit": "map circuit elements to dimer parameters and a flux-tuning curve",
        "cumulants": "heterodyne cumulants up to fourth order",
        "oracle": "truncated Fock-space steady state of the master equation",
        "figure": "data behind one published figure",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "figure":
            sp.add_argument("name", choices=FIGURES, help="figure identifier")
        if name == "fit-reflection":
            sp.add_argument("--trace", help="CSV trace (overrides the config)")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        if args.command == "figure":
            cfg, base = {}, Path(".")
        else:
            cfg, base = _load_config(args)
        artifacts, resolved, summary = COMMANDS[args.command](cfg, base, args)
        manifest = args.out_dir / f"{args.command.replace('-', '_')}.manifest.json"
        write_manifest(manifest, args.command, resolved, [Path(a).name for a in artifacts], __version__)
    except (ConfigError, KeyError, TypeError) as exc:
        print(f"usage error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (DimerError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
