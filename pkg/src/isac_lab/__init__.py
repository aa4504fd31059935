"""Secure ISAC downlink analysis: precoders, CRBs, outage and ergodic metrics,
with a Monte Carlo oracle for every closed form."""

from .errors import (
    ConfigError,
    DegenerateChannel,
    DegenerateSteering,
    IsacLabError,
    NonConvergent,
    SingularFim,
    ZeroIllumination,
)
from .precoder import SlbSplit, SsjbSplit
from .scenario import ScenarioConfig, load_config

__all__ = [
    "ConfigError",
    "DegenerateChannel",
    "DegenerateSteering",
    "IsacLabError",
    "NonConvergent",
    "ScenarioConfig",
    "SingularFim",
    "SlbSplit",
    "SsjbSplit",
    "ZeroIllumination",
    "load_config",
]

__version__ = "0.1.0"
