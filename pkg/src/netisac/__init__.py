"""Networked ISAC planning: coordinated beamforming, UAV association and trajectory design."""

from netisac.geometry import AirPoint, ArrayConfig, GbsSite
from netisac.scenario import Scenario, load_scenario
from netisac.driver import CaseSpec, SolveReport, run_benchmark, solve

__all__ = [
    "AirPoint",
    "ArrayConfig",
    "CaseSpec",
    "GbsSite",
    "Scenario",
    "SolveReport",
    "load_scenario",
    "run_benchmark",
    "solve",
]

__version__ = "0.1.0"
