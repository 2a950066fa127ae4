"""Config parsing with unit-suffixed keys and deterministic CSV/JSON output."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from pathlib import Path

import numpy as np

from .model import TWO_PI, DimerParams, Drive, dbm_to_flux, ghz, pump_frequency


class ConfigError(ValueError):
    """Malformed or incomplete run configuration (a usage error)."""


_RATE_KEYS = ("omega_L", "omega_R", "kappa", "J", "kappa_R", "kappa_int_L", "kappa_int_R")


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"{where}: missing key {key!r}")
    return block[key]


def dimer_from_config(block: dict) -> DimerParams:
    """``{"omega_L_GHz", "omega_R_GHz", "kappa_GHz", "J_GHz", "U_L_kHz", "U_R_kHz", ...}``.

    Frequencies are ordinary (``omega / 2 pi``); loss keys are optional.
    """
    kw = {}
    for name in _RATE_KEYS:
        key = f"{name}_GHz"
        if key in block:
            kw[name] = ghz(float(block[key]))
        elif name in ("omega_L", "omega_R", "kappa", "J"):
            raise ConfigError(f"dimer: missing key {key!r}")
    for name in ("U_L", "U_R"):
        kw[name] = TWO_PI * 1e3 * float(block.get(f"{name}_kHz", 0.0))
    return DimerParams(**kw)


def dimer_to_config(p: DimerParams) -> dict:
    out = {f"{k}_GHz": getattr(p, k) / (TWO_PI * 1e9) for k in _RATE_KEYS}
    out["U_L_kHz"] = p.U_L / (TWO_PI * 1e3)
    out["U_R_kHz"] = p.U_R / (TWO_PI * 1e3)
    return out


def drive_from_config(block: dict, params: DimerParams) -> Drive:
    """Pump frequency from ``omega_p_GHz`` or ``delta_GHz`` (from the mean mode frequency);
    strength from ``power_dBm`` or ``flux_per_us`` (photons per microsecond)."""
    if "omega_p_GHz" in block:
        wp = ghz(float(block["omega_p_GHz"]))
    elif "delta_GHz" in block:
        wp = pump_frequency(params, ghz(float(block["delta_GHz"])))
    else:
        raise ConfigError("drive: need 'omega_p_GHz' or 'delta_GHz'")
    if "power_dBm" in block:
        flux = dbm_to_flux(float(block["power_dBm"]), wp)
    elif "flux_per_us" in block:
        flux = float(block["flux_per_us"]) * 1e6
    else:
        raise ConfigError("drive: need 'power_dBm' or 'flux_per_us'")
    return Drive.from_flux(wp, flux, float(block.get("phase_rad", 0.0)))


def grid_from_config(block: dict, where: str) -> np.ndarray:
    """``{"start": a, "stop": b, "num": n}`` or an explicit ``{"values": [...]}``."""
    if "values" in block:
        return np.asarray(block["values"], float)
    try:
        return np.linspace(float(block["start"]), float(block["stop"]), int(block["num"]))
    except KeyError as exc:
        raise ConfigError(f"{where}: grid needs start/stop/num or values") from exc


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _clean(x.real), "im": _clean(x.imag)}
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def write_manifest(path, subcommand: str, config: dict, artifacts, version: str):
    return write_json(path, {
        "tool": "bhdimer",
        "version": version,
        "subcommand": subcommand,
        "config": config,
        "artifacts": sorted(str(a) for a in artifacts),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    })
