"""A* over latent bit-vector state spaces."""
import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeError

SOLVED = "solved"
UNSOLVABLE = "unsolvable"
LIMIT = "limit_exceeded"


def as_bits(state):
    return np.ascontiguousarray(state, dtype=np.uint8).reshape(-1)


def state_key(state):
    """Hashable exact bit pattern used for duplicate detection."""
    return as_bits(state).tobytes()


def goal_count(s, g):
    """Number of bits that differ from the goal."""
    s, g = as_bits(s), as_bits(g)
    if s.shape != g.shape:
        raise ShapeError(f"state lengths differ: {s.size} vs {g.size}")
    return int(np.count_nonzero(s != g))


def blind(s, g):
    return 0


HEURISTICS = {"blind": blind, "goal_count": goal_count}


@dataclass
class SearchProblem:
    """``successors`` maps a bit vector to an iterable of bit vectors."""

    init: np.ndarray
    goal: np.ndarray
    successors: object

    def __post_init__(self):
        self.init, self.goal = as_bits(self.init), as_bits(self.goal)
        if self.init.shape != self.goal.shape:
            raise ShapeError("init and goal must have the same length")
        if not callable(self.successors):
            # accept provider objects exposing .successors(state)
            self.successors = self.successors.successors


@dataclass
class SearchLimits:
    max_expansions: int = 10 ** 6
    max_seconds: float = 60.0


@dataclass
class SearchStats:
    expansions: int = 0
    generations: int = 0
    evaluations: int = 0
    wall_time: float = 0.0
    peak_open_size: int = 0


@dataclass
class Plan:
    states: list

    @property
    def cost(self):
        return len(self.states) - 1


@dataclass
class SearchResult:
    status: str
    stats: SearchStats
    plan: Plan = None
    expanded: list = field(default_factory=list, repr=False)

    @property
    def solved(self):
        return self.status == SOLVED


def astar(problem, heuristic="goal_count", limits=None, record_expanded=False):
    """Best-first search on ``f = g + h`` with unit costs.

    Ties on ``f`` prefer the larger ``g``, then insertion order. Each exact
    bit pattern is expanded at most once; the blind heuristic therefore
    yields cost-optimal plans.
    """
    h = HEURISTICS[heuristic] if isinstance(heuristic, str) else heuristic
    limits = limits or SearchLimits()
    stats = SearchStats()
    start = time.perf_counter()
    goal_key = state_key(problem.goal)
    counter = itertools.count()

    init_key = state_key(problem.init)
    parents = {init_key: (None, problem.init)}
    best_g = {init_key: 0}
    h0 = h(problem.init, problem.goal)
    stats.evaluations += 1
    open_list = [(h0, 0, next(counter), init_key)]
    closed = set()
    expanded = []

    def finish(status, plan=None):
        stats.wall_time = time.perf_counter() - start
        return SearchResult(status, stats, plan, expanded)

    while open_list:
        stats.peak_open_size = max(stats.peak_open_size, len(open_list))
        f, neg_g, _, key = heapq.heappop(open_list)
        if key in closed:
            continue
        if stats.expansions >= limits.max_expansions or (
                time.perf_counter() - start) > limits.max_seconds:
            return finish(LIMIT)
        closed.add(key)
        stats.expansions += 1
        if record_expanded:
            expanded.append(key)
        if key == goal_key:
            path = []
            while key is not None:
                parent, state = parents[key]
                path.append(state)
                key = parent
            return finish(SOLVED, Plan(path[::-1]))
        g = -neg_g
        state = parents[key][1]
        for child in problem.successors(state):
            child = as_bits(child)
            stats.generations += 1
            ckey = state_key(child)
            if ckey in closed or best_g.get(ckey, g + 2) <= g + 1:
                continue
            best_g[ckey] = g + 1
            parents[ckey] = (key, child)
            stats.evaluations += 1
            heapq.heappush(open_list, (g + 1 + h(child, problem.goal), -(g + 1),
                                       next(counter), ckey))
    return finish(UNSOLVABLE)


@dataclass
class InstanceResult:
    """Outcome of encoding, searching and decoding one image-level instance."""

    search: SearchResult
    frames: np.ndarray = None
    verdict: object = None
    init_bits: np.ndarray = None
    goal_bits: np.ndarray = None

    @property
    def success(self):
        return self.search.solved and bool(self.verdict)


def solve_instance(sae, provider, init_img, goal_img, config, heuristic="goal_count",
                   limits=None, init_state=None, goal_state=None):
    """Encode both images, plan in latent space, decode the plan and validate it.

    Success means a plan was found and every decoded frame is a valid state
    with legal moves between consecutive frames. Ground-truth ``init_state``
    and ``goal_state``, when known, must match the plan's endpoints.
    """
    from .worlds import validate_plan

    init_bits, goal_bits = sae.transform(np.stack([init_img, goal_img]))
    result = astar(SearchProblem(init_bits, goal_bits, provider), heuristic, limits)
    out = InstanceResult(result, init_bits=init_bits, goal_bits=goal_bits)
    if result.solved:
        frames = sae.inverse_transform(np.array(result.plan.states))
        out.frames = frames.reshape((len(frames),) + tuple(config.image_shape))
        out.verdict = validate_plan(out.frames, config, init_state, goal_state)
    return out
