"""Small dense-layer network engine.

Everything here is plain numpy: a chain of fully connected layers with
optional dropout, a hand-written backward pass, Adam, and Gumbel noise.
Random streams come from ``numpy.random.Generator`` over PCG64, which is
stable across platforms for a given seed.

A network may carry a *side input* that is concatenated to the input of
every layer; the action autoencoder needs this.
"""
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterError, ShapeError, StateError

ACTIVATIONS = ("linear", "relu", "sigmoid")
GUMBEL_EPS = 1e-12


def make_rng(seed=None):
    """Return a PCG64-backed generator; ``seed`` may already be a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sigmoid(x):
    # tanh form avoids overflow in exp for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def _activate(name, x):
    if name == "linear":
        return x
    if name == "relu":
        return np.maximum(x, 0)
    return sigmoid(x)


@dataclass
class DenseLayer:
    """``y = act(x @ W.T + B)`` with ``W`` shaped (out_dim, in_dim)."""

    W: np.ndarray
    B: np.ndarray
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.B.shape != (self.W.shape[0],):
            raise ShapeError(
                f"weight {self.W.shape} and bias {self.B.shape} are incompatible")

    @property
    def in_dim(self):
        return self.W.shape[1]

    @property
    def out_dim(self):
        return self.W.shape[0]

    def copy(self):
        return DenseLayer(self.W.copy(), self.B.copy(), self.activation)


@dataclass
class Network:
    layers: list
    dropout_rate: float = 0.0
    side_dim: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError("dropout_rate must lie in [0, 1)")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim + self.side_dim != nxt.in_dim:
                raise ShapeError(
                    f"layer chain broken: {prev.out_dim} (+{self.side_dim} side) "
                    f"-> {nxt.in_dim}")

    @classmethod
    def build(cls, dims, activations, rng, dropout_rate=0.0, side_dim=0,
              dtype=np.float32):
        """Glorot-uniform weights, zero biases. ``dims`` lists every width."""
        if len(activations) != len(dims) - 1:
            raise ShapeError("need one activation per layer")
        layers = []
        for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
            fan_in = fan_in + side_dim
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-limit, limit, size=(fan_out, fan_in)).astype(dtype)
            layers.append(DenseLayer(W, np.zeros(fan_out, dtype=dtype), act))
        return cls(layers, dropout_rate, side_dim)

    @property
    def in_dim(self):
        return self.layers[0].in_dim - self.side_dim

    @property
    def out_dim(self):
        return self.layers[-1].out_dim

    @property
    def dtype(self):
        return self.layers[0].W.dtype

    def parameters(self):
        """Flat list ``[W0, B0, W1, B1, ...]`` of live arrays."""
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.B))
        return out

    def n_parameters(self):
        return sum(p.size for p in self.parameters())

    def astype(self, dtype):
        layers = [DenseLayer(l.W.astype(dtype), l.B.astype(dtype), l.activation)
                  for l in self.layers]
        return Network(layers, self.dropout_rate, self.side_dim)

    def copy(self):
        return Network([l.copy() for l in self.layers], self.dropout_rate,
                       self.side_dim)


@dataclass
class ForwardCache:
    """What ``backward`` needs: per-layer inputs, pre-activations, outputs."""

    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    @property
    def output(self):
        return self.outputs[-1]

    @property
    def logits(self):
        """Pre-activation of the final layer."""
        return self.pre[-1]

    @property
    def activations(self):
        return [self.inputs[0]] + self.outputs


def forward(net, batch, training=False, rng=None, side=None):
    """Run ``batch`` (rows are samples) through ``net``.

    Dropout (inverted scaling) is applied to every hidden layer's output
    when ``training`` is set; ``rng`` is then required.
    """
    x = np.asarray(batch, dtype=net.dtype)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeError(f"expected (batch, {net.in_dim}) input, got {x.shape}")
    if net.side_dim:
        if side is None:
            raise ShapeError("network expects a side input")
        side = np.asarray(side, dtype=net.dtype)
        if side.shape != (x.shape[0], net.side_dim):
            raise ShapeError(f"side input must be {(x.shape[0], net.side_dim)}")
    use_dropout = training and net.dropout_rate > 0
    if use_dropout and rng is None:
        raise StateError("dropout during training needs an rng")

    cache = ForwardCache()
    h = x
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        inp = np.concatenate([h, side], axis=1) if net.side_dim else h
        z = inp @ layer.W.T + layer.B
        a = _activate(layer.activation, z)
        mask = None
        if use_dropout and i < last:
            keep = 1.0 - net.dropout_rate
            mask = (rng.random(a.shape) < keep).astype(net.dtype) / keep
            out = a * mask
        else:
            out = a
        cache.inputs.append(inp)
        cache.pre.append(z)
        cache.post.append(a)
        cache.masks.append(mask)
        cache.outputs.append(out)
        h = out
    return cache


def backward(net, cache, upstream, wrt="output"):
    """Backpropagate ``upstream`` through ``net``.

    ``upstream`` is dL/d(output) by default, or dL/d(final pre-activation)
    with ``wrt="pre"`` (used with logit-space losses such as BCE-with-logits).

    Returns ``(grads, d_input, d_side)`` where ``grads`` is a list of
    ``(dW, dB)`` per layer.
    """
    if cache is None or len(cache.pre) != len(net.layers):
        raise StateError("backward needs the cache of a matching forward call")
    if wrt not in ("output", "pre"):
        raise ParameterError("wrt must be 'output' or 'pre'")
    delta = np.asarray(upstream, dtype=cache.pre[-1].dtype)
    if delta.shape != cache.pre[-1].shape:
        raise ShapeError(f"upstream gradient {delta.shape} does not match "
                         f"output {cache.pre[-1].shape}")

    grads = [None] * len(net.layers)
    d_side = None
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        skip_act = wrt == "pre" and i == len(net.layers) - 1
        if not skip_act:
            if cache.masks[i] is not None:
                delta = delta * cache.masks[i]
            if layer.activation == "relu":
                delta = delta * (cache.pre[i] > 0)
            elif layer.activation == "sigmoid":
                s = cache.post[i]
                delta = delta * s * (1 - s)
        grads[i] = (delta.T @ cache.inputs[i], delta.sum(axis=0))
        d_in = delta @ layer.W
        if net.side_dim:
            part = d_in[:, -net.side_dim:]
            d_side = part if d_side is None else d_side + part
            d_in = d_in[:, :-net.side_dim]
        delta = d_in
    return grads, delta, d_side


def flat_grads(grads):
    """``[(dW, dB), ...]`` -> ``[dW0, dB0, dW1, ...]`` matching ``parameters()``."""
    out = []
    for dW, dB in grads:
        out.extend((dW, dB))
    return out


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **hyper):
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params], **hyper)


def adam_step(params, grads, state):
    """Bias-corrected Adam; updates ``params`` and ``state`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"parameter {p.shape} vs gradient {g.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        step = state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
        p -= step.astype(p.dtype, copy=False)
    return params, state


def gumbel_from_uniform(u):
    u = np.clip(u, GUMBEL_EPS, 1.0 - GUMBEL_EPS)
    return -np.log(-np.log(u))


def sample_gumbel(rng, shape, dtype=np.float64):
    """Gumbel(0, 1) samples via ``-log(-log u)``."""
    return gumbel_from_uniform(rng.random(shape)).astype(dtype, copy=False)


def numerical_gradient(f, params, h=1e-5):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``params``."""
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = f()
            flat[j] = orig - h
            down = f()
            flat[j] = orig
            gflat[j] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric, floor=1e-8):
    """Largest ``|a-n| / (|a|+|n|)``, ignoring entries where both are ~0."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a, n = np.ravel(a), np.ravel(n)
        denom = np.abs(a) + np.abs(n)
        keep = denom >= floor
        if keep.any():
            worst = max(worst, float(np.max(np.abs(a - n)[keep] / denom[keep])))
    return worst
