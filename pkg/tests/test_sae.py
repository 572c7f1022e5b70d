import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zsae.exceptions import ContractError, ParameterError, ShapeError
from zsae.nn import Network, flat_grads, make_rng, max_relative_error, numerical_gradient
from zsae.sae import (
    LossVariant,
    StateAutoEncoder,
    TauSchedule,
    anneal_tau,
    argmax_activation,
    class_probabilities,
    decode,
    encode,
    entropy,
    find_constant_bits,
    gumbel_softmax,
    kl_uniform,
    prune,
    pruning_savings,
    reconstruction_loss,
    sae_objective,
    total_loss,
    zero_suppression_penalty,
)

LOG2 = math.log(2)

probs = arrays(np.float64, st.tuples(st.integers(1, 6)),
               elements=st.floats(0.0, 1.0)).map(lambda p: np.stack([1 - p, p], axis=-1))


# --- latent activations ---

def test_equal_logits_zero_noise_is_half():
    z = gumbel_softmax(np.zeros((3, 2)), 0.37, noise=np.zeros((3, 2)))
    np.testing.assert_allclose(z, 0.5)


def test_low_temperature_selects_argmax():
    logits = np.log([[0.2, 0.8]])
    z = gumbel_softmax(logits, 0.01, noise=np.zeros_like(logits))
    np.testing.assert_allclose(z, [[0.0, 1.0]], atol=1e-6)


def test_gumbel_max_frequency():
    logits = np.tile(np.log([0.25, 0.75]), (10 ** 5, 1))
    z = gumbel_softmax(logits, 1.0, rng=make_rng(0))
    assert abs(np.mean(np.argmax(z, axis=-1) == 1) - 0.75) < 0.01


def test_nonpositive_temperature_rejected():
    with pytest.raises(ParameterError):
        gumbel_softmax(np.zeros((1, 2)), 0.0, noise=np.zeros((1, 2)))


def test_argmax_examples():
    np.testing.assert_array_equal(argmax_activation(np.array([[2.0, -1.0]])), [[1, 0]])
    np.testing.assert_array_equal(argmax_activation(np.array([[0.3, 0.3]])), [[1, 0]])


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.just(2)),
              elements=st.floats(-5, 5)))
def test_temperature_limit_property(logits):
    gap = np.abs(logits[:, 0] - logits[:, 1])
    logits = logits[gap >= 0.1]
    if len(logits) == 0:
        return
    z = gumbel_softmax(logits, 1e-3, noise=np.zeros_like(logits))
    np.testing.assert_allclose(z, argmax_activation(logits), atol=1e-6)


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.just(2)),
              elements=st.floats(-30, 30)), st.floats(0.05, 10))
def test_simplex_rows(logits, tau):
    z = gumbel_softmax(logits, tau, rng=make_rng(0))
    np.testing.assert_allclose(z.sum(-1), 1.0, atol=1e-6)
    np.testing.assert_allclose(class_probabilities(logits).sum(-1), 1.0, atol=1e-6)


# --- loss terms ---

def test_kl_examples():
    assert kl_uniform(np.full((4, 2), 0.5)) == pytest.approx(0.0, abs=1e-12)
    assert kl_uniform(np.array([[1.0, 0.0]])) == pytest.approx(LOG2)
    # log 2 + 0.2 log 0.2 + 0.8 log 0.8
    assert kl_uniform(np.array([[0.2, 0.8]])) == pytest.approx(0.1927, abs=1e-4)


def test_entropy_examples():
    assert entropy(np.array([[1.0, 0.0]])) == 0.0
    assert entropy(np.array([[0.5, 0.5]])) == pytest.approx(LOG2)


@given(probs)
def test_kl_plus_entropy_is_n_log2(q):
    assert kl_uniform(q) + entropy(q) == pytest.approx(len(q) * LOG2, abs=1e-9)


def test_kl_entropy_identity_on_random_rows():
    p = make_rng(0).random((1000, 7))
    q = np.stack([1 - p, p], axis=-1)
    np.testing.assert_allclose(kl_uniform(q) + entropy(q), 7 * LOG2, atol=1e-9)


def test_penalty_examples():
    assert zero_suppression_penalty(np.tile([1.0, 0.0], (4, 1)), 0.7) == 0.0
    z = np.array([[0, 1], [1, 0], [0, 1]], dtype=float)
    assert zero_suppression_penalty(z, 0.7) == pytest.approx(1.4)
    assert zero_suppression_penalty(np.array([[0.5, 0.5]]), 0.2) == pytest.approx(0.1)
    with pytest.raises(ParameterError):
        zero_suppression_penalty(z, -1)


def test_reconstruction_examples():
    assert reconstruction_loss(np.zeros(5), np.zeros(5)) <= 1e-6
    assert reconstruction_loss(np.ones(1), np.full(1, 0.5)) == pytest.approx(0.6931, abs=1e-4)
    with pytest.raises(ShapeError):
        reconstruction_loss(np.zeros(3), np.zeros(4))


@given(arrays(np.float64, 6, elements=st.sampled_from([0.0, 1.0])),
       arrays(np.float64, 6, elements=st.floats(0, 1)))
def test_reconstruction_nonnegative(x, x_hat):
    assert reconstruction_loss(x, x_hat) >= 0


@given(st.floats(0, 100), probs)
def test_loss_algebra(rec, q):
    ng = total_loss(LossVariant("ng"), rec, q, q, 0, 10)
    sae = total_loss(LossVariant("sae"), rec, q, q, 0, 10)
    assert sae == pytest.approx(ng - 2 * kl_uniform(q), abs=1e-9)
    zsae0 = total_loss(LossVariant("zsae", 0.0), rec, q, q, 9, 10)
    assert zsae0 == pytest.approx(sae)


def test_zsae_warmup_suppresses_alpha():
    q = np.array([[0.3, 0.7], [0.9, 0.1]])
    v = LossVariant("zsae", 0.7)
    sae = total_loss(LossVariant("sae"), 1.0, q, q, 0, 300)
    assert total_loss(v, 1.0, q, q, 0, 300) == sae
    assert total_loss(v, 1.0, q, q, 99, 300) == sae
    assert total_loss(v, 1.0, q, q, 100, 300) == pytest.approx(sae + 0.7 * 0.8)


def test_variant_parsing():
    assert LossVariant.parse("zsae") == LossVariant("zsae", 0.7)
    assert LossVariant.parse("zsae:0.2").alpha == 0.2
    assert str(LossVariant.parse("ng")) == "ng"
    with pytest.raises(ParameterError):
        LossVariant.parse("sae:0.3")
    with pytest.raises(ParameterError):
        LossVariant("vae")


# --- temperature schedule ---

def test_tau_schedule_endpoints():
    s = TauSchedule(5.0, 0.7)
    assert anneal_tau(0, 200, s) == 5.0
    assert anneal_tau(180, 200, s) == 0.7
    assert anneal_tau(199, 200, s) == 0.7
    mid = anneal_tau(90, 200, s)
    assert mid == pytest.approx(math.sqrt(5.0 * 0.7))


@given(st.integers(1, 500))
def test_tau_monotone(total):
    taus = [anneal_tau(e, total) for e in range(total)]
    assert all(b <= a for a, b in zip(taus, taus[1:]))
    assert min(taus) >= 0.7


def test_bad_schedule():
    with pytest.raises(ParameterError):
        TauSchedule(0.5, 0.7)


# --- objective gradient ---

@pytest.mark.parametrize("kind,alpha", [("ng", 0.0), ("sae", 0.0), ("zsae", 0.7)])
def test_objective_gradient(kind, alpha):
    rng = make_rng(0)
    enc = Network.build([6, 5, 8], ["relu", "linear"], rng, dtype=np.float64)
    dec = Network.build([8, 5, 6], ["relu", "sigmoid"], rng, dtype=np.float64)
    for layer in enc.layers + dec.layers:
        layer.B += 0.05
    X = (make_rng(1).random((3, 6)) > 0.5).astype(float)
    noise = make_rng(2).gumbel(size=(3, 4, 2))
    variant = LossVariant(kind, alpha)
    _, _, grads = sae_objective(enc, dec, X, noise, 0.9, variant, alpha)
    params = enc.parameters() + dec.parameters()
    numeric = numerical_gradient(
        lambda: sae_objective(enc, dec, X, noise, 0.9, variant, alpha)[0], params, h=1e-5)
    assert max(max_relative_error(a, n) for a, n in zip(grads, numeric)) < 1e-4


# --- estimator ---

def test_transform_shapes_and_determinism(tiny_sae, lights3):
    _, _, X = lights3
    bits = tiny_sae.transform(X[:10])
    assert bits.shape == (10, 12) and bits.dtype == np.uint8
    np.testing.assert_array_equal(bits, tiny_sae.transform(X[:10]))
    repeated = np.stack([encode(tiny_sae, X[0]) for _ in range(100)])
    assert (repeated == repeated[0]).all()


def test_decode_range_and_purity(tiny_sae):
    b = np.array([1, 0] * 6)
    img = decode(tiny_sae, b)
    assert img.shape == (18, 18)
    assert 0 <= img.min() and img.max() <= 1
    np.testing.assert_array_equal(img, decode(tiny_sae, b))
    with pytest.raises(ShapeError):
        decode(tiny_sae, np.zeros(5))


def test_sample_mode_reproducible(tiny_sae, lights3):
    _, _, X = lights3
    a = encode(tiny_sae, X[3], "sample", 1.0, make_rng(7))
    b = encode(tiny_sae, X[3], "sample", 1.0, make_rng(7))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ParameterError):
        encode(tiny_sae, X[3], "sample")


def test_image_shape_mismatch(tiny_sae):
    with pytest.raises(ShapeError):
        tiny_sae.transform(np.zeros((2, 10, 10)))


def test_history_and_warmup(lights3):
    _, _, X = lights3
    m = StateAutoEncoder(n_latent=6, hidden=(16,), epochs=9, random_state=0).fit(X[:64])
    assert len(m.history_["rec"]) == 9 == len(m.history_["tau"])
    assert m.history_["penalty"][:3] == [0.0, 0.0, 0.0]
    assert m.history_["penalty"][3] > 0


def test_fixed_seed_identical_weights(lights3):
    _, _, X = lights3
    kw = dict(n_latent=4, hidden=(8,), epochs=2, random_state=5)
    a = StateAutoEncoder(**kw).fit(X[:32])
    b = StateAutoEncoder(**kw).fit(X[:32])
    for p, q in zip(a.parameter_arrays(), b.parameter_arrays()):
        np.testing.assert_array_equal(p, q)


def test_get_params_roundtrip():
    m = StateAutoEncoder(n_latent=9, variant="ng")
    assert StateAutoEncoder(**m.get_params()).get_params() == m.get_params()
    assert m.effective_kl_weight == 1.0
    assert StateAutoEncoder(variant="sae").effective_kl_weight < 1.0


# --- pruning ---

def test_pruning_worked_example():
    prev, nxt = pruning_savings(1000, 68, 1000, 1000)
    assert prev == 1_865_864
    assert nxt == 1_864_000
    assert nxt == 2 * 1000 * (1000 - 68)


def test_constant_bits_constructed():
    m = StateAutoEncoder(n_latent=3, hidden=(4,), epochs=0).fit(np.zeros((2, 2, 2)))
    last = m.encoder_.layers[-1]
    last.W[:] = 0
    last.B[:] = np.tile([5.0, -5.0], 3)
    assert find_constant_bits(m, np.random.default_rng(0).random((5, 2, 2))) == {0, 1, 2}


def test_prune_equivalence(tiny_sae, lights3):
    _, _, X = lights3
    dead = find_constant_bits(tiny_sae, X)
    pruned, report = prune(tiny_sae, dead, X)
    keep = np.setdiff1d(np.arange(tiny_sae.n_bits_), sorted(dead))
    np.testing.assert_array_equal(pruned.transform(X), tiny_sae.transform(X)[:, keep])
    np.testing.assert_allclose(pruned.reconstruct(X), tiny_sae.reconstruct(X), atol=1e-5)
    assert report.delta_n == len(dead)
    assert report.total_before - report.total_after == report.floats_removed


def test_prune_empty_is_identity(tiny_sae, lights3):
    _, _, X = lights3
    pruned, report = prune(tiny_sae, set())
    assert report.floats_removed == 0 and pruned.n_bits_ == tiny_sae.n_bits_
    np.testing.assert_array_equal(pruned.reconstruct(X[:5]), tiny_sae.reconstruct(X[:5]))


def test_prune_rejects_live_bit(tiny_sae, lights3):
    _, _, X = lights3
    bits = tiny_sae.transform(X)
    live = int(np.flatnonzero(bits.max(0) == 1)[0])
    with pytest.raises(ContractError):
        prune(tiny_sae, {live}, X)
