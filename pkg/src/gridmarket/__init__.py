"""Peer-to-peer energy market simulation on radial distribution feeders.

Nodal prices come from the duals of a relaxed branch-flow OPF with load
shedding; prosumers and consumers trade through a nodal / zonal / network
double auction with average pricing; trades are screened with linear
sensitivities and settled against the grid at FIT / nodal prices.
"""
from .config import OutageEvent, ScenarioConfig, StrategyParams
from .netmodel import Generator, Line, Network, Node, Profiles, ancestor, validate_network, validate_radial
from .scenario_io import load_scenario
from .simkernel import IntervalRecord, apply_events, compare_runs, resilience_index, run_simulation

__version__ = "0.1.0"

__all__ = [
    "OutageEvent", "ScenarioConfig", "StrategyParams", "Generator", "Line", "Network", "Node", "Profiles",
    "ancestor", "validate_network", "validate_radial", "load_scenario", "IntervalRecord", "apply_events",
    "compare_runs", "resilience_index", "run_simulation",
]
