"""Reading and writing configuration files.

Files are YAML. A ``system`` mapping holds :class:`SystemConfig` fields and an
optional ``power_model`` mapping holds :class:`PowerModel` fields. A file with
neither key is read as a bare ``system`` mapping.

Alternative spellings accepted by the loader:

* ``<name>_db``: any linear quantity given in dB, e.g. ``omega_db: 130``.
* ``snr_db`` instead of ``rho``: ``rho = sigma2 * 10**(snr_db/10)``.
* ``noise_power`` (total W over the band) instead of ``sigma2``; divided by
  ``bandwidth`` to give the per-symbol value.
* ``a_rate_bw`` (W) instead of ``a_rate``; divided by ``bandwidth``.
"""
from __future__ import annotations

from pathlib import Path

import yaml

from .core import ConfigError, PowerModel, SystemConfig, validate, validate_power_model

__all__ = ["config_from_mapping", "power_model_from_mapping", "load_config", "save_config",
           "dump_config"]

_INT_FIELDS = ("M", "K", "tau_c", "tau_p")


def _undb(data: dict) -> dict:
    out = {}
    for key, val in data.items():
        if key.endswith("_db") and key != "snr_db":
            base = key[:-3]
            if base in data:
                raise ConfigError(f"both {base!r} and {key!r} given")
            out[base] = 10.0 ** (float(val) / 10.0)
        else:
            out[key] = val
    return out


def _coerce(data: dict) -> dict:
    out = {}
    for key, val in data.items():
        if key in _INT_FIELDS and isinstance(val, float) and val.is_integer():
            val = int(val)
        elif isinstance(val, int) and not isinstance(val, bool) and key not in _INT_FIELDS:
            val = float(val)
        out[key] = val
    return out


def config_from_mapping(data: dict) -> SystemConfig:
    """Build and validate a :class:`SystemConfig` from a plain mapping."""
    if not isinstance(data, dict):
        raise ConfigError("system section must be a mapping")
    d = _undb(dict(data))
    bandwidth = float(d.get("bandwidth", 2e7))
    d.setdefault("bandwidth", bandwidth)
    if "noise_power" in d:
        if "sigma2" in d:
            raise ConfigError("both 'sigma2' and 'noise_power' given")
        d["sigma2"] = float(d.pop("noise_power")) / bandwidth
    if "snr_db" in d:
        if "rho" in d:
            raise ConfigError("both 'rho' and 'snr_db' given")
        if "sigma2" not in d:
            raise ConfigError("'snr_db' needs 'sigma2' or 'noise_power'")
        d["rho"] = float(d["sigma2"]) * 10.0 ** (float(d.pop("snr_db")) / 10.0)
    if "tau_p" not in d and "K" in d:
        d["tau_p"] = d["K"]
    d.setdefault("delta", 0.5)
    cfg = SystemConfig.from_dict(_coerce(d))
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def power_model_from_mapping(data: dict | None, bandwidth: float = 2e7) -> PowerModel:
    d = _undb(dict(data or {}))
    if "a_rate_bw" in d:
        if "a_rate" in d:
            raise ConfigError("both 'a_rate' and 'a_rate_bw' given")
        d["a_rate"] = float(d.pop("a_rate_bw")) / bandwidth
    d.setdefault("a_rate", 2.3e-2 / bandwidth)
    pm = PowerModel.from_dict(_coerce(d))
    errs = validate_power_model(pm)
    if errs:
        raise ConfigError(errs)
    return pm


def load_config(path) -> tuple[SystemConfig, PowerModel]:
    """Load ``(SystemConfig, PowerModel)`` from a YAML file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "system" in data or "power_model" in data:
        cfg = config_from_mapping(data.get("system", {}))
        pm = power_model_from_mapping(data.get("power_model"), cfg.bandwidth)
    else:
        cfg = config_from_mapping(data)
        pm = power_model_from_mapping(None, cfg.bandwidth)
    return cfg, pm


def dump_config(cfg: SystemConfig, pm: PowerModel | None = None) -> str:
    doc = {"system": cfg.to_dict()}
    if pm is not None:
        doc["power_model"] = pm.to_dict()
    return yaml.safe_dump(doc, sort_keys=False)


def save_config(path, cfg: SystemConfig, pm: PowerModel | None = None) -> None:
    """Write linear, per-symbol values; floats are written with ``repr`` precision."""
    Path(path).write_text(dump_config(cfg, pm), encoding="utf-8")
