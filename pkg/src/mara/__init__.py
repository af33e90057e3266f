"""MARA: class-based over-reservation with pre-built aggregation trees,
simulated against the per-flow MIRA baseline."""

from .engine import MARA, MIRA, MetricsReport, ScenarioConfig, Simulation, run
from .scenario import load_scenario, parse_scenario

__version__ = "0.1.0"
