"""Transition datasets and plan validation against the ground-truth rules."""
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ParameterError
from .core import enumerate_states, is_legal_transition, random_state, successors
from .render import _classify, render


@dataclass
class TransitionDataset:
    pre_images: np.ndarray
    suc_images: np.ndarray
    pre_states: list
    suc_states: list
    config: object

    def __len__(self):
        return len(self.pre_states)

    def images(self):
        """Pre and successor images stacked, for autoencoder training."""
        return np.concatenate([self.pre_images, self.suc_images])


def _render_many(states, config):
    cache = {}
    out = np.empty((len(states),) + config.image_shape)
    for i, s in enumerate(states):
        if s not in cache:
            cache[s] = render(s, config)
        out[i] = cache[s]
    return out


def sample_transitions(config, count, rng, walk_steps=50):
    if count < 1:
        raise ParameterError("count must be at least 1")
    pre, suc = [], []
    for _ in range(count):
        s = random_state(config, rng, walk_steps)
        options = successors(s, config)
        pre.append(s)
        suc.append(options[int(rng.integers(len(options)))])
    return TransitionDataset(_render_many(pre, config), _render_many(suc, config),
                             pre, suc, config)


def all_transitions(config, states=None):
    """Every (state, successor) pair of the enumerated state space."""
    states = enumerate_states(config) if states is None else states
    pre, suc = [], []
    for s in states:
        for t in successors(s, config):
            pre.append(s)
            suc.append(t)
    return TransitionDataset(_render_many(pre, config), _render_many(suc, config),
                             pre, suc, config)


@dataclass
class PlanVerdict:
    ok: bool
    states: list = field(default_factory=list)
    failed_at: int = None
    reason: str = None

    def __bool__(self):
        return self.ok


def validate_plan(frames, config, init=None, goal=None):
    """Check each frame is readable and each step follows the puzzle rules.

    When ``init`` or ``goal`` states are given, the first and last frames
    must show them.
    """
    if len(frames) == 0:
        raise ParameterError("a plan has at least one frame")
    states = []
    for i, frame in enumerate(frames):
        state, reason = _classify(frame, config)
        if state is None:
            return PlanVerdict(False, states, i, f"frame {i}: {reason}")
        if states and not is_legal_transition(states[-1], state, config):
            states.append(state)
            return PlanVerdict(False, states, i, f"step {i}: illegal move "
                               f"{states[-2]} -> {state}")
        states.append(state)
    if init is not None and not np.array_equal(states[0], init):
        return PlanVerdict(False, states, 0, "first frame is not the initial state")
    if goal is not None and not np.array_equal(states[-1], goal):
        return PlanVerdict(False, states, len(states) - 1, "last frame is not the goal state")
    return PlanVerdict(True, states)
