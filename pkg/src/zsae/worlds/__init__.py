"""Procedural puzzle worlds: LightsOut, Twisted LightsOut and sliding tiles."""
import numpy as np

from .core import (
    KINDS,
    WorldConfig,
    bfs_distances,
    enumerate_states,
    goal_state,
    is_legal_transition,
    is_valid_state,
    press,
    random_state,
    random_walk,
    successors,
    world_from_name,
)
from .dataset import PlanVerdict, TransitionDataset, all_transitions, sample_transitions, validate_plan
from .imageio import emit_plan_strip, plan_strip, read_idx, read_pgm, write_idx, write_pgm
from .noise import NO_NOISE, NoiseSpec, apply_noise
from .render import classify_image, render, swirl, unswirl


def render_all(states, config):
    return np.stack([render(s, config) for s in states])


__all__ = [
    "KINDS", "WorldConfig", "bfs_distances", "enumerate_states", "goal_state",
    "is_legal_transition", "is_valid_state", "press", "random_state", "random_walk",
    "successors", "world_from_name", "PlanVerdict", "TransitionDataset",
    "all_transitions", "sample_transitions", "validate_plan", "read_idx", "read_pgm",
    "write_idx", "write_pgm", "plan_strip", "emit_plan_strip", "NO_NOISE", "NoiseSpec", "apply_noise",
    "classify_image", "render", "swirl", "unswirl", "render_all",
]
