"""Momentum-space quantum walks of a kicked atom with spontaneous emission."""

from .analysis import classical_walk_reference, l1_distance, metrics
from .engine import EnsembleResult, RunConfig, run_ensemble, run_trajectory
from .params import DerivedParams, PhysicsParams, derive, invert_for_targets
from .walk import MomentumDistribution, ratchet_state, run_ideal

__version__ = "0.1.0"

__all__ = [
    "DerivedParams",
    "EnsembleResult",
    "MomentumDistribution",
    "PhysicsParams",
    "RunConfig",
    "classical_walk_reference",
    "derive",
    "invert_for_targets",
    "l1_distance",
    "metrics",
    "ratchet_state",
    "run_ensemble",
    "run_ideal",
    "run_trajectory",
]
