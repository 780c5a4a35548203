"""Distance-only relative localization and velocity consensus for agents
moving on translating circles."""

from .control import ControllerGains, FormationGraph, NeighborTerm
from .errors import EstimationError, ParseError, RangeConsensusError, ValidationError
from .estimator import NeighborEstimate, choose_window, estimate_neighbor
from .kinematics import AgentState, DistanceTrace, Vec2, Window, distance_trace
from .scenario import load_scenario, parse_scenario, preset, serialize_scenario
from .simulator import PerturbationEvent, Scenario, TimeSeries, reference_continuous_run, run

__version__ = "0.1.0"

__all__ = [
    "AgentState", "ControllerGains", "DistanceTrace", "EstimationError", "FormationGraph",
    "NeighborEstimate", "NeighborTerm", "ParseError", "PerturbationEvent", "RangeConsensusError",
    "Scenario", "TimeSeries", "ValidationError", "Vec2", "Window", "choose_window",
    "distance_trace", "estimate_neighbor", "load_scenario", "parse_scenario", "preset",
    "reference_continuous_run", "run", "serialize_scenario",
]
