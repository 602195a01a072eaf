"""Joint beam selection, UE-AP assignment and max-min fair uplink power allocation."""

__version__ = "0.1.0"

from .scenario import (
    BeamConfig,
    ConfigError,
    NetworkConfig,
    Scenario,
    enumerate_beam_configs,
    load_network_config,
    sample_scenario_c1,
    sample_scenario_c2,
    save_network_config,
)
from .fixedpoint import Allocation, solution_efficiency, solve

__all__ = [
    "Allocation",
    "BeamConfig",
    "ConfigError",
    "NetworkConfig",
    "Scenario",
    "enumerate_beam_configs",
    "load_network_config",
    "sample_scenario_c1",
    "sample_scenario_c2",
    "save_network_config",
    "solution_efficiency",
    "solve",
    "__version__",
]
