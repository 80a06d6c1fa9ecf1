"""Decentralized bi-level navigation for multi-robot social mini-games.

A sealed-bid auction fixes who passes a conflict zone first; each robot's
arc-sampling local planner then caps its top speed at ``v_max / turn``.
"""

from .auction import allocate, optimal_bid, payment, verify_dsic, welfare
from .engine import Simulation, run_episode
from .geometry import ConflictZone, Disc, VectorMap, load_map
from .global_planner import astar, build_nav_graph
from .local_planner import Kinodynamics, plan_step, plan_velocity, scale_kinodynamics
from .metrics import EpisodeMetrics
from .scenario import Scenario, builtin_scenario, load_scenario

__version__ = "0.1.0"

__all__ = [
    "ConflictZone",
    "Disc",
    "EpisodeMetrics",
    "Kinodynamics",
    "Scenario",
    "Simulation",
    "VectorMap",
    "allocate",
    "astar",
    "build_nav_graph",
    "builtin_scenario",
    "load_map",
    "load_scenario",
    "optimal_bid",
    "payment",
    "plan_step",
    "plan_velocity",
    "run_episode",
    "scale_kinodynamics",
    "verify_dsic",
    "welfare",
]
