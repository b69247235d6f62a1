"""Synthetic scenarios with a known illegal-fishing rule, plus brute-force oracles."""
from .generator import Scenario, ScenarioConfig, eez_geometry, generate, write_scenario
from .oracles import oracle_metrics, oracle_split, oracle_tree

__all__ = [
    "Scenario", "ScenarioConfig", "eez_geometry", "generate", "write_scenario",
    "oracle_metrics", "oracle_split", "oracle_tree",
]
