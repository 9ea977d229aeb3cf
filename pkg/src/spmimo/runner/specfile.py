"""Experiment spec files.

A spec is a YAML mapping::

    name: fig2b
    scenario: rate            # rate | cdf | interference | smoke
    sweep: {var: M, from: 50, to: 500, step: 50}   # or {var: M, values: [...]}
    schemes: [rp_k, rp_opt, sp_nosub, sp_estsub, sp_perfsub]
    n_networks: 200
    n_fading: 500             # Monte Carlo draws per deployment (0: closed form only)
    mc_schemes: [sp_estsub]   # schemes evaluated by Monte Carlo
    seed: 1
    n_av: 20                  # mean BSs in the window
    system: {M: 100, K: 10, tau_c: 200, snr_db: -6, noise_power: 1.0e-13}
    power_model: {}

Errors name the file, line and field.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..configfile import config_from_mapping, power_model_from_mapping
from ..core import ConfigError, PowerModel, SystemConfig, validate

__all__ = ["SpecError", "ExperimentSpec", "SCHEMES", "SCENARIOS", "SWEEP_VARS", "SCALES",
           "BUILTIN_SPECS", "parse_spec", "load_spec", "apply_scale"]

SCHEMES = ("rp_k", "rp_opt", "sp_nosub", "sp_estsub", "sp_perfsub")
SCENARIOS = ("rate", "cdf", "interference", "smoke")
SWEEP_VARS = ("M", "tau_c", "snr_db", "K")
SCALES = {
    "desk": {"n_networks": 200, "n_fading": 500, "n_av": 20.0},
    "full": {"n_networks": 500, "n_fading": 1000, "n_av": 50.0},
}

_TABLE1 = {"M": 100, "K": 10, "tau_c": 200, "snr_db": -6.0, "noise_power": 1.0e-13,
           "bandwidth": 2.0e7, "alpha": 3.76, "omega_db": 130.0, "density": 100.0}


class SpecError(ValueError):
    def __init__(self, source: str, line: int | None, fld: str, msg: str):
        self.source, self.line, self.field = source, line, fld
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: field '{fld}': {msg}")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    scenario: str
    sweep_var: str | None
    sweep_values: tuple
    schemes: tuple
    mc_schemes: tuple
    n_networks: int
    n_fading: int
    seed: int
    n_av: float
    system: SystemConfig
    power_model: PowerModel
    delta_step: float = 0.01
    delta_step_mc: float = 0.05
    per_cell_sum: bool = False
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def spec_hash(self) -> str:
        d = dataclasses.asdict(self)
        d.pop("raw")
        text = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("raw")
        d["system"] = self.system.to_dict()
        d["power_model"] = self.power_model.to_dict()
        d["sweep_values"] = list(self.sweep_values)
        d["schemes"] = list(self.schemes)
        d["mc_schemes"] = list(self.mc_schemes)
        return d

    def config_at(self, value) -> SystemConfig:
        """Base config with the sweep variable set to ``value``."""
        cfg = self.system
        if self.sweep_var is None:
            return cfg
        if self.sweep_var == "snr_db":
            return cfg.replace(rho=cfg.sigma2 * 10.0 ** (float(value) / 10.0))
        if self.sweep_var == "K":
            return cfg.replace(K=int(value), tau_p=int(value))
        if self.sweep_var == "tau_c":
            return cfg.replace(tau_c=int(value), tau_p=min(cfg.tau_p, int(value)))
        return cfg.replace(**{self.sweep_var: int(value)})


BUILTIN_SPECS = {
    "fig2b": {"scenario": "rate", "sweep": {"var": "M", "from": 50, "to": 500, "step": 50}},
    "fig2c": {"scenario": "rate", "sweep": {"var": "tau_c", "values": [50, 100, 150, 200, 300,
                                                                       400, 500]}},
    "fig2d": {"scenario": "rate", "sweep": {"var": "snr_db", "from": -20, "to": 20,
                                            "step": 5}},
    "fig2e": {"scenario": "rate", "per_cell_sum": True,
              "sweep": {"var": "K", "values": [2, 5, 10, 15, 20, 30, 40]}},
    "fig3a": {"scenario": "cdf"},
    "fig3b": {"scenario": "interference",
              "schemes": ["rp_k", "rp_opt", "sp_nosub", "sp_perfsub"]},
    "fig3c": {"scenario": "rate", "sweep": {"var": "M", "from": 50, "to": 500, "step": 50}},
    "fig3d": {"scenario": "rate", "sweep": {"var": "tau_c", "values": [50, 100, 150, 200, 300,
                                                                       400, 500]}},
    "smoke": {"scenario": "smoke", "n_networks": 2, "n_fading": 100, "n_av": 6,
              "mc_schemes": ["rp_k", "sp_nosub", "sp_estsub", "sp_perfsub"],
              "system": {"M": 8, "K": 2, "tau_c": 16}},
}
for _name, _d in BUILTIN_SPECS.items():
    _d.setdefault("name", _name)


# ----------------------------------------------------------------- parsing

def _line_map(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers."""
    lines = {}
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(n, prefix):
        if isinstance(n, yaml.MappingNode):
            for k, v in n.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)
    if node is not None:
        walk(node, "")
    return lines


def _range(sw, err):
    if "values" in sw:
        vals = sw["values"]
        if not isinstance(vals, list) or not vals:
            raise err("sweep.values", "must be a nonempty list")
        return tuple(vals)
    missing = [k for k in ("from", "to", "step") if k not in sw]
    if missing:
        raise err("sweep", f"needs 'values' or from/to/step (missing {', '.join(missing)})")
    a, b, s = sw["from"], sw["to"], sw["step"]
    for k, v in (("from", a), ("to", b), ("step", s)):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise err(f"sweep.{k}", "must be a number")
    if s <= 0 or b < a:
        raise err("sweep.step", "need step > 0 and to >= from")
    n = int(np.floor((b - a) / s + 1e-9)) + 1
    vals = [a + i * s for i in range(n)]
    if all(isinstance(x, int) for x in (a, b, s)):
        vals = [int(v) for v in vals]
    else:
        vals = [round(float(v), 12) for v in vals]
    return tuple(vals)


def parse_spec(data: dict, source: str = "<spec>", lines: dict | None = None) -> ExperimentSpec:
    """Validate a spec mapping; errors carry the line of the offending field."""
    lines = lines or {}

    def err(fld, msg):
        top = fld.split(".")[0]
        return SpecError(source, lines.get(fld, lines.get(top)), fld, msg)

    if not isinstance(data, dict):
        raise SpecError(source, 1, "<root>", "spec must be a mapping")
    known = {"name", "scenario", "sweep", "schemes", "mc_schemes", "n_networks", "n_fading",
             "seed", "n_av", "system", "power_model", "delta_step", "delta_step_mc",
             "per_cell_sum"}
    for k in data:
        if k not in known:
            raise err(k, "unknown field")
    scenario = data.get("scenario", "rate")
    if scenario not in SCENARIOS:
        raise err("scenario", f"must be one of {', '.join(SCENARIOS)}")
    name = str(data.get("name", scenario))

    sweep_var, sweep_values = None, (None,)
    if "sweep" in data:
        sw = data["sweep"]
        if not isinstance(sw, dict):
            raise err("sweep", "must be a mapping")
        sweep_var = sw.get("var")
        if sweep_var not in SWEEP_VARS:
            raise err("sweep.var", f"must be one of {', '.join(SWEEP_VARS)}")
        sweep_values = _range(sw, err)
    elif scenario == "rate":
        raise err("sweep", "required for scenario 'rate'")

    def scheme_list(key, default):
        val = data.get(key, default)
        if not isinstance(val, list):
            raise err(key, "must be a list")
        for s in val:
            if s not in SCHEMES:
                raise err(key, f"unknown scheme {s!r}; expected {', '.join(SCHEMES)}")
        return tuple(val)

    schemes = scheme_list("schemes", list(SCHEMES))
    mc_schemes = scheme_list("mc_schemes", ["sp_estsub"])

    def integer(key, default, lo):
        v = data.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < lo:
            raise err(key, f"must be an integer >= {lo}")
        return v

    def real(key, default, lo, hi=None):
        v = data.get(key, default)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > lo or (
                hi is not None and v > hi):
            raise err(key, f"must be a number in ({lo}, {hi if hi is not None else 'inf'}]")
        return float(v)

    n_networks = integer("n_networks", SCALES["desk"]["n_networks"], 1)
    n_fading = integer("n_fading", SCALES["desk"]["n_fading"], 0)
    seed = integer("seed", 1, 0)
    n_av = real("n_av", SCALES["desk"]["n_av"], 1.0)
    delta_step = real("delta_step", 0.01, 0.0, 0.5)
    delta_step_mc = real("delta_step_mc", 0.05, 0.0, 0.5)
    if 0 < n_fading < 100 and set(mc_schemes) & set(schemes):
        raise err("n_fading", "must be 0 or at least 100")
    if "sp_estsub" in schemes and "sp_estsub" not in mc_schemes:
        raise err("mc_schemes", "sp_estsub has no closed form and must be simulated")
    if "sp_estsub" in schemes and n_fading == 0:
        raise err("n_fading", "sp_estsub needs n_fading >= 100")

    sysd = dict(_TABLE1)
    user_sys = data.get("system", {}) or {}
    if not isinstance(user_sys, dict):
        raise err("system", "must be a mapping")
    if any(k in user_sys for k in ("rho", "snr_db")):
        sysd.pop("snr_db", None)
    if any(k in user_sys for k in ("sigma2", "noise_power", "noise_power_db")):
        sysd.pop("noise_power", None)
    if "omega" in user_sys:
        sysd.pop("omega_db", None)
    sysd.update(user_sys)
    sysd.setdefault("tau_p", sysd["K"])
    try:
        system = config_from_mapping(sysd)
    except (ConfigError, TypeError, ValueError) as exc:
        raise err("system", str(exc)) from None
    try:
        pm = power_model_from_mapping(data.get("power_model"), system.bandwidth)
    except (ConfigError, TypeError, ValueError) as exc:
        raise err("power_model", str(exc)) from None
    if sweep_var is not None:
        for v in sweep_values:
            try:
                probe = ExperimentSpec(name, scenario, sweep_var, sweep_values, schemes,
                                       mc_schemes, n_networks, n_fading, seed, n_av, system,
                                       pm).config_at(v)
            except (TypeError, ValueError) as exc:
                raise err("sweep", f"value {v!r}: {exc}") from None
            bad = validate(probe)
            if bad:
                raise err("sweep", f"value {v!r} gives an invalid config: {'; '.join(bad)}")
    return ExperimentSpec(name=name, scenario=scenario, sweep_var=sweep_var,
                          sweep_values=tuple(sweep_values), schemes=schemes,
                          mc_schemes=mc_schemes, n_networks=n_networks, n_fading=n_fading,
                          seed=seed, n_av=n_av, system=system, power_model=pm,
                          delta_step=delta_step, delta_step_mc=delta_step_mc,
                          per_cell_sum=bool(data.get("per_cell_sum", False)), raw=dict(data))


def load_spec(path_or_name) -> ExperimentSpec:
    """Parse a spec file, or a built-in spec by name (e.g. ``"fig2b"``)."""
    key = str(path_or_name)
    p = Path(key)
    if not p.exists() and key in BUILTIN_SPECS:
        return parse_spec(dict(BUILTIN_SPECS[key]), source=f"<builtin {key}>")
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(key, None, "<file>", str(exc)) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecError(key, mark.line + 1 if mark else None, "<syntax>", str(exc)) from None
    return parse_spec(data, source=key, lines=_line_map(text))


def apply_scale(spec: ExperimentSpec, scale: str) -> ExperimentSpec:
    """Override trial counts and window size with a named preset."""
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}")
    s = SCALES[scale]
    n_fading = s["n_fading"] if spec.n_fading else 0
    return dataclasses.replace(spec, n_networks=s["n_networks"], n_fading=n_fading,
                               n_av=s["n_av"])
