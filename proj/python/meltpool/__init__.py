"""Melt-pool heat conduction solver for laser powder bed fusion tracks.

Configs and results cross the boundary as plain dicts; the C++ side reads
and writes JSON.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    FetchError,
    InvalidInput,
    MetricError,
    SolverError,
    deviation_percent,
    halfspace_flux_temperature,
    phase_fraction,
    radiation_flux,
    rosenthal_temperature,
)

__version__ = _core.__version__

__all__ = [
    "ConfigError",
    "FetchError",
    "InvalidInput",
    "MetricError",
    "SolverError",
    "absorbed_power",
    "case_catalog",
    "default_config",
    "deviation_percent",
    "halfspace_flux_temperature",
    "phase_fraction",
    "radiation_flux",
    "resolve_config",
    "rosenthal_temperature",
    "run",
    "run_case",
    "total_power",
    "verify_halfspace",
]


def _dump(config):
    return json.dumps(config or {})


def default_config():
    """Resolved default config (CBM case B, desk grid)."""
    return json.loads(_core.default_config())


def resolve_config(config=None):
    """Merge `config` onto the defaults, validate, and return the full echo."""
    return json.loads(_core.resolve_config(_dump(config)))


def absorbed_power(config=None):
    """Q times eta of the configured source, W."""
    return _core.absorbed_power(_dump(config))


def total_power(config=None):
    """Numerical surface integral of the configured source, W."""
    return _core.total_power(_dump(config))


def run(config=None):
    """Simulate one track; returns final temperatures, energy balance and metrics."""
    return json.loads(_core.run(_dump(config)))


def case_catalog():
    return json.loads(_core.case_catalog())


def run_case(machine, case, model="iso", grid="desk", profile=None):
    """Run a benchmark case and compare it with the published measurements."""
    return json.loads(_core.run_case(machine, case, model, grid, profile))


def verify_halfspace():
    return json.loads(_core.verify_halfspace())
