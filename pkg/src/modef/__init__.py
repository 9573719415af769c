"""Multi-objective autonomous network defence toolkit.

Seedable defence simulation with decomposed vector rewards, two
multi-objective trainers (weighted-advantage PPO and a Pareto Conditioned
Network), Pareto-front tooling, an evaluation harness, and a live steering
service for changing objective priorities mid-episode.
"""

from .env import DefenceEnv, Game, GameSpec, RewardComponents, assemble_objectives
from .pareto import (
    FrontEstimate,
    ParetoPoint,
    UtopianPoint,
    WeightVector,
    crowding_distances,
    dominates,
    hypervolume_2d,
    pareto_prune,
    scalarize_chebyshev,
    scalarize_linear,
)
from .simnet import BlueAction, BlueKind, RedMode, Scenario, SimConfig, build_topology

__all__ = [
    "BlueAction",
    "BlueKind",
    "DefenceEnv",
    "FrontEstimate",
    "Game",
    "GameSpec",
    "ParetoPoint",
    "RedMode",
    "RewardComponents",
    "Scenario",
    "SimConfig",
    "UtopianPoint",
    "WeightVector",
    "assemble_objectives",
    "build_topology",
    "crowding_distances",
    "dominates",
    "hypervolume_2d",
    "pareto_prune",
    "scalarize_chebyshev",
    "scalarize_linear",
]

__version__ = "0.1.0"
