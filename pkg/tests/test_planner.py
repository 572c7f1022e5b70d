import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zsae.exceptions import ShapeError
from zsae.planner import SearchLimits, SearchProblem, astar, goal_count, solve_instance
from zsae.worlds import (
    bfs_distances,
    enumerate_states,
    goal_state,
    random_walk,
    render,
    successors,
    world_from_name,
)

L3 = world_from_name("lightsout3")


def lights_successors(s):
    return [np.array(t) for t in successors(tuple(int(v) for v in s), L3)]


def graph_provider(adj):
    return lambda s: [np.array(t) for t in adj.get(tuple(int(v) for v in s), ())]


def test_goal_count_examples():
    assert goal_count([0, 1, 1], [0, 1, 1]) == 0
    assert goal_count([0, 0, 0], [1, 0, 1]) == 2
    with pytest.raises(ShapeError):
        goal_count([0, 1], [0, 1, 1])


@given(st.lists(st.integers(0, 1), min_size=8, max_size=8),
       st.lists(st.integers(0, 1), min_size=8, max_size=8))
def test_goal_count_symmetric(s, g):
    assert goal_count(s, g) == goal_count(g, s)


def test_init_equals_goal():
    res = astar(SearchProblem([1, 0], [1, 0], lambda s: []), "blind")
    assert res.solved and res.plan.cost == 0 and res.stats.expansions == 1


def test_unsolvable_two_components():
    adj = {(0, 0): [(0, 1)], (0, 1): [(1, 1), (0, 0)], (1, 1): [(0, 1)], (1, 0): []}
    res = astar(SearchProblem((0, 0), (1, 0), graph_provider(adj)), "blind")
    assert res.status == "unsolvable" and res.stats.expansions == 3


def test_limit_exceeded_respects_bound():
    res = astar(SearchProblem(goal_state(L3), (1,) * 9, lights_successors), "blind",
                SearchLimits(max_expansions=5))
    assert res.status == "limit_exceeded" and res.stats.expansions <= 5


def test_blind_matches_bfs():
    rng = np.random.default_rng(0)
    goal = goal_state(L3)
    dist = bfs_distances(goal, L3)
    for _ in range(30):
        init = random_walk(goal, int(rng.integers(0, 10)), L3, rng)
        res = astar(SearchProblem(init, goal, lights_successors), "blind", record_expanded=True)
        assert res.plan.cost == dist[init]
        assert len(res.expanded) == len(set(res.expanded))
        assert res.stats.expansions <= res.stats.generations + 1
        states = [tuple(int(v) for v in s) for s in res.plan.states]
        assert states[0] == init and states[-1] == goal
        assert all(b in successors(a, L3) for a, b in zip(states, states[1:]))


def test_goal_count_finds_valid_plans():
    rng = np.random.default_rng(1)
    goal = goal_state(L3)
    init = random_walk(goal, 6, L3, rng)
    res = astar(SearchProblem(init, goal, lights_successors), "goal_count")
    assert res.solved


def test_provider_object_accepted():
    class Provider:
        def successors(self, s):
            return lights_successors(s)

    a = astar(SearchProblem((1,) + (0,) * 8, goal_state(L3), Provider()), "blind")
    b = astar(SearchProblem((1,) + (0,) * 8, goal_state(L3), lights_successors), "blind")
    assert a.plan.cost == b.plan.cost and a.stats.expansions == b.stats.expansions


class StateCode:
    """Encoder that reads the true state from a rendered image."""

    n_bits_ = 9

    def transform(self, X):
        from zsae.worlds import classify_image

        return np.array([classify_image(x, L3) for x in X], dtype=np.uint8)

    def inverse_transform(self, B):
        return np.array([render(tuple(int(v) for v in b), L3).ravel() for b in B])


def test_solve_instance_end_to_end():
    goal = goal_state(L3)
    init = random_walk(goal, 5, L3, np.random.default_rng(2))
    res = solve_instance(StateCode(), lights_successors, render(init, L3), render(goal, L3),
                         L3, "blind", init_state=init, goal_state=goal)
    assert res.success
    assert res.frames.shape == (res.search.plan.cost + 1, 18, 18)


def test_solve_instance_same_image():
    img = render(goal_state(L3), L3)
    res = solve_instance(StateCode(), lights_successors, img, img, L3)
    assert res.success and len(res.frames) == 1


def test_solve_instance_unseen_goal_is_unsolvable():
    goal = goal_state(L3)
    only = {goal: []}
    res = solve_instance(StateCode(), graph_provider(only), render(goal, L3),
                         render((1,) * 9, L3), L3, "blind")
    assert res.search.status == "unsolvable" and not res.success
