"""Uplink multicell massive MIMO with regular and superimposed pilots."""
from .core import (ConfigError, PowerModel, RateResult, Scheme, SinrBreakdown, SystemConfig,
                   table1_config, table1_power_model, validate)

__version__ = "0.1.0"

__all__ = ["ConfigError", "PowerModel", "RateResult", "Scheme", "SinrBreakdown", "SystemConfig",
           "table1_config", "table1_power_model", "validate", "__version__"]
