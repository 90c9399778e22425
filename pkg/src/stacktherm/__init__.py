"""Compact thermal simulation of 3D-stacked dies with microchannel cooling."""

from pathlib import Path

from .config import (Block, CoolingParams, Floorplan, LayerSpec, Material, PowerTrace,
                     StackSpec, builtin_materials, load_stack, lookup_material,
                     parse_floorplan, parse_power_trace, parse_stack_config)
from .dtm import DtmPolicy, apply_dtm
from .errors import ConfigError, IllPosedModelError, SolverError, StackThermError, SweepError
from .grid import (CellId, ThermalGridModel, build_grid_model, instantaneous_power_vector,
                   map_power_to_grid, stack_sample)
from .microchannel import ChannelLayout, layout_channels
from .solver import (SimResult, SolveSettings, dense_steady_solve, energy_balance,
                     steady_solve, transient_run)

__version__ = "0.1.0"


def bundled_example() -> Path:
    """Directory holding the bundled 5-layer example (``stack.ini``, ``sweep.ini``)."""
    return Path(__file__).parent / "data" / "bundled"


__all__ = [
    "Block", "CellId", "ChannelLayout", "ConfigError", "CoolingParams", "DtmPolicy",
    "Floorplan", "IllPosedModelError", "LayerSpec", "Material", "PowerTrace", "SimResult",
    "SolveSettings", "SolverError", "StackSpec", "StackThermError", "SweepError",
    "ThermalGridModel", "apply_dtm", "build_grid_model", "builtin_materials",
    "bundled_example", "dense_steady_solve", "energy_balance", "instantaneous_power_vector",
    "layout_channels", "load_stack", "lookup_material", "map_power_to_grid",
    "parse_floorplan", "parse_power_trace", "parse_stack_config", "stack_sample",
    "steady_solve", "transient_run",
]
