import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zsae.exceptions import ParameterError, ResourceLimitError, ShapeError
from zsae.worlds import (
    NoiseSpec,
    all_transitions,
    apply_noise,
    bfs_distances,
    classify_image,
    enumerate_states,
    goal_state,
    is_legal_transition,
    press,
    random_walk,
    render,
    render_all,
    sample_transitions,
    successors,
    swirl,
    unswirl,
    validate_plan,
    world_from_name,
)

L3 = world_from_name("lightsout3")
TILES = world_from_name("puzzle8")
lights_states = st.lists(st.integers(0, 1), min_size=9, max_size=9).map(tuple)


def test_press_center_lights_plus():
    s = press(goal_state(L3), 4, L3)
    assert s == (0, 1, 0, 1, 1, 1, 0, 1, 0)


@given(lights_states, st.integers(0, 8))
def test_press_involution(s, b):
    assert press(press(s, b, L3), b, L3) == s


@given(lights_states, st.permutations(range(9)))
def test_press_commutes(s, order):
    a = s
    for b in order:
        a = press(a, b, L3)
    c = s
    for b in range(9):
        c = press(c, b, L3)
    assert a == c


@given(lights_states)
def test_lights_successors_symmetric(s):
    succ = successors(s, L3)
    assert len(succ) == 9
    assert all(s in successors(t, L3) for t in succ)


def test_tile_corner_has_two_successors():
    assert len(successors(goal_state(TILES), TILES)) == 2
    centre = (1, 2, 3, 4, 0, 5, 6, 7, 8)
    assert len(successors(centre, TILES)) == 4


def test_tile_successors_symmetric():
    s = random_walk(goal_state(TILES), 20, TILES, np.random.default_rng(0))
    assert all(s in successors(t, TILES) for t in successors(s, TILES))


def test_enumeration_sizes():
    assert len(enumerate_states(L3)) == 512
    assert len(set(enumerate_states(world_from_name("lightsout4")))) == 65536
    assert len(enumerate_states(world_from_name("lightsout3"), cap=600)) == 512


def test_tile_enumeration_matches_bfs_oracle():
    states = enumerate_states(TILES)
    assert len(states) == len(set(states)) == 181440
    assert len(bfs_distances(goal_state(TILES), TILES)) == 181440


def test_enumeration_cap():
    with pytest.raises(ResourceLimitError):
        enumerate_states(L3, cap=100)
    with pytest.raises(ResourceLimitError):
        enumerate_states(TILES, cap=1000)


def test_render_all_off_is_uniform():
    img = render(goal_state(L3), L3)
    assert img.shape == (18, 18)
    assert np.ptp(img) == 0


def test_render_injective(lights3):
    _, _, X = lights3
    flat = X.reshape(len(X), -1)
    assert len({row.tobytes() for row in flat}) == 512
    assert 0 <= X.min() and X.max() <= 1


def test_tile_render_shape_and_injective():
    states = enumerate_states(TILES)[:300]
    imgs = render_all(states, TILES)
    assert imgs.shape == (300, 48, 48)
    assert len({im.tobytes() for im in imgs}) == 300


def test_twisted_zero_strength_is_plain():
    tw = world_from_name("twisted3", swirl_strength=0.0)
    s = (1, 0, 1, 0, 1, 1, 0, 0, 1)
    np.testing.assert_allclose(render(s, tw), render(s, L3), atol=1e-12)


def test_swirl_zero_strength_is_identity():
    img = render((1, 0, 1, 0, 1, 0, 1, 0, 1), L3)
    np.testing.assert_allclose(swirl(img, 0.0), img, atol=1e-12)
    np.testing.assert_allclose(unswirl(img, 0.0), img, atol=1e-12)


def test_classify_round_trip(lights3):
    config, states, X = lights3
    assert all(classify_image(x, config) == s for x, s in zip(X, states))


def test_classify_tiles_round_trip():
    states = enumerate_states(TILES)[:200]
    assert all(classify_image(render(s, TILES), TILES) == s for s in states)


def test_classify_twisted_round_trip():
    tw = world_from_name("twisted3")
    states = enumerate_states(tw)
    assert all(classify_image(render(s, tw), tw) == s for s in states)


def test_classify_under_gaussian_noise(lights3):
    config, states, X = lights3
    rng = np.random.default_rng(0)
    idx = rng.integers(0, 512, 1000)
    hits = sum(classify_image(apply_noise(X[i], NoiseSpec("gaussian", 0.3), rng), config)
               == states[i] for i in idx)
    assert hits >= 990


def test_classify_gray_fails():
    assert classify_image(np.full((18, 18), 0.5), L3) is None


def test_classify_shape_error():
    with pytest.raises(ShapeError):
        classify_image(np.zeros((10, 10)), L3)


def test_noise_identity_cases(rng):
    img = rng.random((8, 8))
    np.testing.assert_array_equal(apply_noise(img, NoiseSpec(), rng), img)
    np.testing.assert_array_equal(apply_noise(img, NoiseSpec("gaussian", 0.0), rng), img)


def test_salt_pepper_fraction(rng):
    img = rng.uniform(0.05, 0.95, (64, 64))
    out = apply_noise(img, NoiseSpec("salt_pepper", 0.12), rng)
    assert abs(np.mean(out != img) - 0.12) < 0.02
    assert set(np.unique(out[out != img])) <= {0.0, 1.0}


@given(st.sampled_from(["gaussian:0.6", "salt_pepper:0.12", "gaussian:3"]),
       st.integers(0, 1000))
def test_noise_stays_in_unit_interval(spec, seed):
    rng = np.random.default_rng(seed)
    out = apply_noise(rng.random((6, 6)), NoiseSpec.parse(spec), rng)
    assert 0 <= out.min() and out.max() <= 1


def test_noise_spec_parsing():
    assert NoiseSpec.parse("sp:0.12") == NoiseSpec("salt_pepper", 0.12)
    assert str(NoiseSpec.parse("gaussian:0.3")) == "gaussian:0.3"
    with pytest.raises(ParameterError):
        NoiseSpec.parse("gaussian")
    with pytest.raises(ParameterError):
        NoiseSpec("salt_pepper", 2.0)


def test_random_walk_examples(rng):
    g = goal_state(L3)
    assert random_walk(g, 0, L3, rng) == g
    assert random_walk(g, 1, L3, rng) in successors(g, L3)
    for steps in (3, 7, 14):
        s = random_walk(g, steps, L3, rng)
        assert bfs_distances(s, L3, [g])[g] <= steps


def test_sample_transitions(rng):
    ds = sample_transitions(L3, 100, np.random.default_rng(4))
    assert len(ds) == 100
    assert all(is_legal_transition(s, t, L3) for s, t in zip(ds.pre_states, ds.suc_states))
    again = sample_transitions(L3, 100, np.random.default_rng(4))
    np.testing.assert_array_equal(ds.pre_images, again.pre_images)


def test_all_transitions_count():
    assert len(all_transitions(L3)) == 512 * 9


def test_validate_plan_examples():
    g = goal_state(L3)
    path = [g, press(g, 0, L3), press(press(g, 0, L3), 8, L3)]
    assert validate_plan([render(s, L3) for s in path], L3)
    two_presses = press(press(g, 0, L3), 4, L3)
    verdict = validate_plan([render(g, L3), render(two_presses, L3)], L3)
    assert not verdict and verdict.failed_at == 1
    assert validate_plan([render(g, L3)], L3)
    assert not validate_plan([render(g, L3)], L3, goal=press(g, 1, L3))
    with pytest.raises(ParameterError):
        validate_plan([], L3)
