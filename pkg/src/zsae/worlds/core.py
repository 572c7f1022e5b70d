"""Puzzle state spaces: configuration, moves, enumeration, random walks.

States are tuples of ints. LightsOut uses one 0/1 entry per cell in
row-major order; tile puzzles store the tile number found at each position,
with tile 0 acting as the blank.
"""
import math
from collections import deque
from dataclasses import dataclass, replace

from ..exceptions import ParameterError, ResourceLimitError

KINDS = ("lights_out", "twisted_lights_out", "tile_puzzle")
TILE_SOURCES = ("builtin_glyphs", "external_image", "idx_digits")
DEFAULT_STATE_CAP = 2 ** 20


@dataclass(frozen=True)
class WorldConfig:
    kind: str = "lights_out"
    rows: int = 3
    cols: int = 3
    resolution: int = 0  # 0 -> 6 px per light, 16 px per tile
    tile_source: str = "builtin_glyphs"
    tile_path: str = None
    labels_path: str = None
    swirl_strength: float = math.pi / 2
    margin: float = 0.1
    state_cap: int = DEFAULT_STATE_CAP

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown world kind {self.kind!r}")
        if self.tile_source not in TILE_SOURCES:
            raise ParameterError(f"unknown tile source {self.tile_source!r}")
        if self.rows < 1 or self.cols < 1:
            raise ParameterError("grid dimensions must be positive")
        if self.is_lights and self.rows != self.cols:
            raise ParameterError("LightsOut grids are square")
        if self.tile_source != "builtin_glyphs" and self.tile_path is None:
            raise ParameterError(f"tile source {self.tile_source} needs tile_path")
        if self.resolution == 0:
            object.__setattr__(self, "resolution", 6 if self.is_lights else 16)

    @property
    def is_lights(self):
        return self.kind in ("lights_out", "twisted_lights_out")

    @property
    def n_cells(self):
        return self.rows * self.cols

    @property
    def image_shape(self):
        return (self.rows * self.resolution, self.cols * self.resolution)

    @property
    def name(self):
        if self.kind == "lights_out":
            return f"lightsout{self.rows}"
        if self.kind == "twisted_lights_out":
            return f"twisted{self.rows}"
        return f"puzzle{self.rows}x{self.cols}"

    def with_(self, **changes):
        return replace(self, **changes)


def world_from_name(name, **overrides):
    """``lightsout3``, ``lightsout4``, ``twisted3``, ``puzzle8`` / ``puzzle3x3``."""
    key = name.lower()
    if key.startswith("lightsout"):
        n = int(key[len("lightsout"):] or 3)
        return WorldConfig("lights_out", n, n, **overrides)
    if key.startswith("twisted"):
        n = int(key[len("twisted"):] or 3)
        return WorldConfig("twisted_lights_out", n, n, **overrides)
    if key in ("puzzle8", "8puzzle", "tiles3"):
        return WorldConfig("tile_puzzle", 3, 3, **overrides)
    if key.startswith("puzzle") and "x" in key:
        r, c = key[len("puzzle"):].split("x")
        return WorldConfig("tile_puzzle", int(r), int(c), **overrides)
    raise ParameterError(f"unknown world name {name!r}")


def goal_state(config):
    """All lights off, or tiles in order with the blank at the top-left."""
    return tuple(range(config.n_cells)) if not config.is_lights else (0,) * config.n_cells


def _neighbors(config, i):
    r, c = divmod(i, config.cols)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        rr, cc = r + dr, c + dc
        if 0 <= rr < config.rows and 0 <= cc < config.cols:
            yield rr * config.cols + cc


def press(state, button, config):
    """Toggle ``button`` and its orthogonal neighbours."""
    lights = list(state)
    for i in (button, *_neighbors(config, button)):
        lights[i] ^= 1
    return tuple(lights)


def successors(state, config):
    if config.is_lights:
        return [press(state, b, config) for b in range(config.n_cells)]
    blank = state.index(0)
    out = []
    for j in _neighbors(config, blank):
        tiles = list(state)
        tiles[blank], tiles[j] = tiles[j], tiles[blank]
        out.append(tuple(tiles))
    return out


def is_valid_state(state, config):
    if len(state) != config.n_cells:
        return False
    if config.is_lights:
        return all(v in (0, 1) for v in state)
    return sorted(state) == list(range(config.n_cells))


def is_legal_transition(pre, suc, config):
    return tuple(suc) in successors(tuple(pre), config)


def enumerate_states(config, cap=None):
    """Every state reachable from the goal, in a deterministic order."""
    cap = config.state_cap if cap is None else cap
    if config.is_lights:
        n = config.n_cells
        if 2 ** n > cap:
            raise ResourceLimitError(f"2^{n} LightsOut states exceed the cap {cap}")
        # bit i of the index is cell i
        return [tuple((k >> i) & 1 for i in range(n)) for k in range(2 ** n)]
    start = goal_state(config)
    seen = {start}
    order = [start]
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        for t in successors(s, config):
            if t not in seen:
                seen.add(t)
                order.append(t)
                if len(order) > cap:
                    raise ResourceLimitError(f"state space exceeds the cap {cap}")
                frontier.append(t)
    return order


def bfs_distances(source, config, targets=None):
    """Ground-truth shortest move counts from ``source``."""
    dist = {source: 0}
    frontier = deque([source])
    remaining = set(targets) if targets is not None else None
    while frontier:
        s = frontier.popleft()
        if remaining is not None:
            remaining.discard(s)
            if not remaining:
                break
        for t in successors(s, config):
            if t not in dist:
                dist[t] = dist[s] + 1
                frontier.append(t)
    return dist


def random_walk(goal, steps, config, rng):
    """Apply ``steps`` uniformly chosen legal moves starting from ``goal``."""
    if steps < 0:
        raise ParameterError("steps must be non-negative")
    state = tuple(goal)
    for _ in range(steps):
        options = successors(state, config)
        state = options[int(rng.integers(len(options)))]
    return state


def random_state(config, rng, walk_steps=50):
    """Uniform bits for LightsOut, a long random walk for tile puzzles."""
    if config.is_lights:
        return tuple(int(v) for v in rng.integers(0, 2, size=config.n_cells))
    return random_walk(goal_state(config), walk_steps, config, rng)
