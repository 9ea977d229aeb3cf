"""Configuration and result types shared by every module."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum

__all__ = [
    "Scheme",
    "SystemConfig",
    "PowerModel",
    "SinrBreakdown",
    "RateResult",
    "ConfigError",
    "validate",
    "validate_power_model",
    "table1_config",
    "table1_power_model",
    "config_hash",
]


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class Scheme(str, Enum):
    """Pilot scheme and, for superimposed pilots, the pilot-subtraction variant."""

    RP = "rp"
    SP_NOSUB = "sp_nosub"
    SP_ESTSUB = "sp_estsub"
    SP_PERFSUB = "sp_perfsub"

    @property
    def is_sp(self) -> bool:
        return self is not Scheme.RP

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(f"unknown scheme {value!r}")


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters.

    Powers are per symbol: ``rho`` is the average transmit energy per symbol and
    ``sigma2`` the noise energy per symbol, so ``rho * bandwidth`` is in watts.
    ``omega`` is the linear pathloss at 1 km and ``density`` is in BS/km^2.
    """

    M: int
    K: int
    tau_c: int
    tau_p: int
    delta: float
    rho: float
    sigma2: float
    alpha: float = 3.76
    omega: float = 1e13
    density: float = 100.0
    bandwidth: float = 2e7

    @property
    def snr(self) -> float:
        """rho / sigma2."""
        return self.rho / self.sigma2

    def powers(self, scheme: Scheme) -> tuple[float, float]:
        """Return ``(rho_d, rho_p)`` for ``scheme``."""
        if Scheme.parse(scheme) is Scheme.RP:
            return self.rho, self.rho
        return (1.0 - self.delta) * self.rho, self.delta * self.rho

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError([f"unknown field {k!r}" for k in sorted(unknown)])
        missing = [f.name for f in dataclasses.fields(cls)
                   if f.name not in data and f.default is dataclasses.MISSING]
        if missing:
            raise ConfigError([f"missing field {k!r}" for k in missing])
        return cls(**data)


@dataclass(frozen=True)
class PowerModel:
    """Circuit power constants for the energy-efficiency model.

    ``a_rate`` is in W per bit/s and ``flops_per_watt`` is the computational
    efficiency used to convert detection and estimation flops to watts.
    """

    eta: float = 0.39
    c0: float = 10.0
    c1: float = 0.1
    d0: float = 0.1
    a_rate: float = 2.3e-2 / 2e7
    flops_per_watt: float = 12.8e9

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PowerModel":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError([f"unknown field {k!r}" for k in sorted(unknown)])
        return cls(**data)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(cfg: SystemConfig) -> list[str]:
    """Return every violated invariant of ``cfg``; an empty list means valid."""
    v = []
    for name in ("M", "K", "tau_c", "tau_p"):
        val = getattr(cfg, name)
        if not _is_int(val):
            v.append(f"{name} must be an integer, got {val!r}")
    for name in ("delta", "rho", "sigma2", "alpha", "omega", "density", "bandwidth"):
        val = getattr(cfg, name)
        if not _is_real(val):
            v.append(f"{name} must be a finite real, got {val!r}")
    if v:
        return v
    if cfg.M < 1:
        v.append("M < 1")
    if cfg.K < 1:
        v.append("K < 1")
    if cfg.tau_c < 1:
        v.append("tau_c < 1")
    if cfg.tau_p < cfg.K:
        v.append("tau_p < K")
    if cfg.tau_p > cfg.tau_c:
        v.append("tau_p > tau_c")
    if cfg.K > cfg.tau_c:
        v.append("K > tau_c")
    if not 0.0 <= cfg.delta <= 1.0:
        v.append("delta outside [0, 1]")
    if cfg.rho <= 0:
        v.append("rho <= 0")
    if cfg.sigma2 <= 0:
        v.append("sigma2 <= 0")
    if cfg.alpha <= 2:
        v.append("alpha <= 2")
    for name in ("omega", "density", "bandwidth"):
        if getattr(cfg, name) <= 0:
            v.append(f"{name} <= 0")
    return v


def validate_power_model(pm: PowerModel) -> list[str]:
    v = []
    for f in dataclasses.fields(pm):
        val = getattr(pm, f.name)
        if not _is_real(val):
            v.append(f"{f.name} must be a finite real, got {val!r}")
        elif val < 0:
            v.append(f"{f.name} < 0")
    if not v:
        if not 0 < pm.eta <= 1:
            v.append("eta outside (0, 1]")
        if pm.flops_per_watt <= 0:
            v.append("flops_per_watt <= 0")
        if pm.c0 <= 0:
            v.append("c0 <= 0")
    return v


def table1_config(M: int = 100, K: int = 10, tau_c: int = 200, tau_p: int | None = None,
                  delta: float = 0.5, snr_db: float = -6.0, **overrides) -> SystemConfig:
    """Reference deployment: alpha 3.76, 130 dB pathloss at 1 km, 20 MHz,
    -100 dBm noise (1e-13 W over the band), 100 BS/km^2."""
    bandwidth = overrides.pop("bandwidth", 2e7)
    sigma2 = overrides.pop("sigma2", 1e-13 / bandwidth)
    rho = overrides.pop("rho", sigma2 * 10.0 ** (snr_db / 10.0))
    cfg = SystemConfig(M=M, K=K, tau_c=tau_c, tau_p=K if tau_p is None else tau_p,
                       delta=delta, rho=rho, sigma2=sigma2, bandwidth=bandwidth,
                       **{"alpha": 3.76, "omega": 1e13, "density": 100.0, **overrides})
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def table1_power_model(bandwidth: float = 2e7) -> PowerModel:
    return PowerModel(a_rate=2.3e-2 / bandwidth)


def config_hash(*objs) -> str:
    """Stable short hash of dataclasses or plain mappings."""
    payload = [o.to_dict() if hasattr(o, "to_dict") else o for o in objs]
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _check_component(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} is not finite: {value}")
    if value < 0:
        raise ValueError(f"{name} is negative: {value}")


@dataclass(frozen=True)
class SinrBreakdown:
    """Decomposition of an effective SINR into numerator and denominator terms.

    ``pilot_contamination`` and ``extra_coherent`` are the coherent (M-scaling)
    interference terms, ``non_coherent`` collects interference that does not
    grow with M, and ``noise_term`` is the noise contribution.
    """

    coherent_gain: float
    pilot_contamination: float
    extra_coherent: float
    non_coherent: float
    noise_term: float
    sinr: float = field(init=False)

    def __post_init__(self):
        for f in ("coherent_gain", "pilot_contamination", "extra_coherent",
                  "non_coherent", "noise_term"):
            object.__setattr__(self, f, float(getattr(self, f)))
            _check_component(f, getattr(self, f))
        den = self.denominator
        if den > 0:
            s = self.coherent_gain / den
        else:
            s = math.inf if self.coherent_gain > 0 else 0.0
        object.__setattr__(self, "sinr", s)

    @property
    def denominator(self) -> float:
        return self.pilot_contamination + self.extra_coherent + self.non_coherent + self.noise_term

    @property
    def coherent_interference(self) -> float:
        return self.pilot_contamination + self.extra_coherent

    @property
    def noncoherent_and_noise(self) -> float:
        return self.non_coherent + self.noise_term

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class RateResult:
    rate_bps: float
    prelog: float
    sinr: SinrBreakdown
    scheme: Scheme

    @classmethod
    def from_sinr(cls, scheme, sinr: SinrBreakdown, cfg: SystemConfig) -> "RateResult":
        scheme = Scheme.parse(scheme)
        prelog = 1.0 - cfg.tau_p / cfg.tau_c if scheme is Scheme.RP else 1.0
        r = cfg.bandwidth * prelog * math.log2(1.0 + sinr.sinr) if prelog > 0 else 0.0
        return cls(rate_bps=r, prelog=prelog, sinr=sinr, scheme=scheme)

    @property
    def spectral_efficiency(self) -> float:
        """Rate in bit/s/Hz."""
        return self.prelog * math.log2(1.0 + self.sinr.sinr) if self.prelog > 0 else 0.0
