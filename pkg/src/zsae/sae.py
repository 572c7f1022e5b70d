"""State autoencoders with a Gumbel-Softmax binary latent layer.

Three training objectives are supported:

* ``ng``   -- reconstruction + KL(q || Bern(0.5)), the textbook VAE loss;
* ``sae``  -- reconstruction - KL, which amounts to an entropy penalty;
* ``zsae`` -- the ``sae`` loss plus ``alpha * sum_n z_n1`` pushing unused
  propositions to false. ``alpha`` is held at 0 for the first
  ``warmup_fraction`` of the epochs.

After training the stochastic activation is replaced by a per-unit argmax,
so :meth:`StateAutoEncoder.transform` is deterministic.
"""
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ContractError, ParameterError, ShapeError, TrainingError
from .nn import (
    AdamState,
    DenseLayer,
    Network,
    adam_step,
    backward,
    flat_grads,
    forward,
    log_softmax,
    make_rng,
    sample_gumbel,
    sigmoid,
    softmax,
)
from .validation import check_bits, check_images

LOG2 = math.log(2.0)
VARIANT_KINDS = ("ng", "sae", "zsae")
BCE_EPS = 1e-7
# Weight of the KL term when ``kl_weight=None``. At weight 1 the negated-KL
# objectives drive every unit to a constant code within the first epoch, so
# they get a small weight; ``ng`` keeps the standard VAE weight.
DEFAULT_KL_WEIGHTS = {"ng": 1.0, "sae": 0.003, "zsae": 0.003}


@dataclass(frozen=True)
class LossVariant:
    kind: str = "sae"
    alpha: float = 0.0
    warmup_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        if self.kind not in VARIANT_KINDS:
            raise ParameterError(f"unknown loss variant {self.kind!r}")
        if self.alpha < 0:
            raise ParameterError("alpha must be non-negative")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ParameterError("warmup_fraction must lie in [0, 1]")

    @classmethod
    def parse(cls, text, warmup_fraction=1.0 / 3.0):
        """``ng``, ``sae``, ``zsae`` (alpha 0.7) or ``zsae:0.2``."""
        kind, _, alpha = text.strip().lower().partition(":")
        if kind == "zsae":
            return cls("zsae", float(alpha) if alpha else 0.7, warmup_fraction)
        if alpha:
            raise ParameterError(f"variant {kind!r} takes no alpha")
        return cls(kind, 0.0, warmup_fraction)

    def __str__(self):
        return f"zsae:{self.alpha:g}" if self.kind == "zsae" else self.kind

    def effective_alpha(self, epoch, total_epochs):
        if self.kind != "zsae" or epoch < self.warmup_fraction * total_epochs:
            return 0.0
        return self.alpha


@dataclass(frozen=True)
class TauSchedule:
    tau_max: float = 5.0
    tau_min: float = 0.7
    mode: str = "exponential"  # or "constant" (always tau_max)

    def __post_init__(self):
        if not self.tau_max >= self.tau_min > 0:
            raise ParameterError("need tau_max >= tau_min > 0")
        if self.mode not in ("exponential", "constant"):
            raise ParameterError(f"unknown anneal mode {self.mode!r}")


def anneal_tau(epoch, total_epochs, schedule=TauSchedule()):
    """Exponential decay from ``tau_max`` reaching ``tau_min`` at 90% of training."""
    if schedule.mode == "constant":
        return schedule.tau_max
    horizon = 0.9 * total_epochs
    if epoch >= horizon:
        return schedule.tau_min
    rate = math.log(schedule.tau_max / schedule.tau_min) / horizon
    return max(schedule.tau_min, schedule.tau_max * math.exp(-rate * epoch))


# --- latent activations -----------------------------------------------------

def class_probabilities(logits):
    return softmax(np.asarray(logits, dtype=np.float64), axis=-1)


def gumbel_softmax(logits, tau, rng=None, noise=None):
    """``softmax((logits + g) / tau)`` over the last axis.

    Pass ``noise`` to reuse fixed Gumbel samples (e.g. for gradient checks);
    otherwise they are drawn from ``rng``.
    """
    if tau <= 0:
        raise ParameterError("temperature must be positive")
    logits = np.asarray(logits)
    if noise is None:
        if rng is None:
            raise ParameterError("gumbel_softmax needs an rng or explicit noise")
        noise = sample_gumbel(rng, logits.shape, logits.dtype)
    return softmax((logits + noise) / tau, axis=-1)


def argmax_activation(logits):
    """One-hot at the largest logit; ties go to the lowest index (false)."""
    logits = np.asarray(logits)
    idx = np.argmax(logits, axis=-1)
    return np.eye(logits.shape[-1], dtype=logits.dtype)[idx]


# --- loss terms -------------------------------------------------------------

def _xlogx(q):
    q = np.asarray(q, dtype=np.float64)
    return np.where(q > 0, q * np.log(np.where(q > 0, q, 1.0)), 0.0)


def kl_uniform(q):
    """KL(q || Bern(0.5)) in nats, summed over units (last two axes)."""
    q = np.asarray(q, dtype=np.float64)
    return np.sum(LOG2 + np.sum(_xlogx(q), axis=-1), axis=-1)


def entropy(q):
    return -np.sum(_xlogx(q), axis=(-2, -1))


def zero_suppression_penalty(z, alpha):
    if alpha < 0:
        raise ParameterError("alpha must be non-negative")
    return alpha * np.sum(np.asarray(z)[..., 1], axis=-1)


def reconstruction_loss(x, x_hat):
    """Mean binary cross entropy over pixels."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"shapes differ: {x.shape} vs {x_hat.shape}")
    p = np.clip(x_hat, BCE_EPS, 1 - BCE_EPS)
    return float(np.mean(-(x * np.log(p) + (1 - x) * np.log(1 - p))))


def total_loss(variant, rec, q, z, epoch, total_epochs):
    """Combine a reconstruction term with the variant's regulariser.

    ``q`` and ``z`` may be single ``(N, 2)`` matrices or batches; batch terms
    are averaged.
    """
    kl = float(np.mean(kl_uniform(q)))
    if variant.kind == "ng":
        return rec + kl
    loss = rec - kl
    if variant.kind == "zsae":
        alpha = variant.effective_alpha(epoch, total_epochs)
        loss = loss + float(np.mean(zero_suppression_penalty(z, alpha)))
    return loss


def sae_objective(encoder, decoder, X, noise, tau, variant, alpha, training=False,
                  rng=None, kl_weight=1.0, target=None):
    """Loss and parameter gradients for one batch.

    The reconstruction term is the per-image BCE summed over pixels (the
    negative log-likelihood of a Bernoulli decoder), averaged over the batch.
    KL/entropy is taken from the noise-free ``softmax(logits)``; the decoder
    sees the Gumbel-Softmax sample. Gradients are ordered encoder params
    then decoder params, matching ``parameters()``.
    """
    B = len(X)
    enc = forward(encoder, X, training, rng)
    X = X if target is None else target
    logits = enc.output.reshape(B, -1, 2)
    z = softmax((logits + noise) / tau, axis=-1)
    dec = forward(decoder, z.reshape(B, -1), training, rng)
    y = dec.logits

    rec = np.sum(np.logaddexp(0, y) - X * y) / B
    logq = log_softmax(logits, axis=-1)
    q = np.exp(logq)
    kl = np.sum(LOG2 + np.sum(q * logq, axis=-1)) / B
    pen = alpha * np.sum(z[..., 1]) / B
    sign = (1.0 if variant.kind == "ng" else -1.0) * kl_weight
    loss = rec + sign * kl + pen

    dgrads, dz, _ = backward(decoder, dec, (sigmoid(y) - X) / B, wrt="pre")
    dz = dz.reshape(z.shape)
    dz[..., 1] += alpha / B
    dlogits = z * (dz - np.sum(z * dz, axis=-1, keepdims=True)) / tau
    dlogits += (sign / B) * q * (logq - np.sum(q * logq, axis=-1, keepdims=True))
    egrads, _, _ = backward(encoder, enc, dlogits.reshape(B, -1).astype(enc.output.dtype))
    parts = {"rec": float(rec), "kl": float(kl), "penalty": float(pen)}
    return float(loss), parts, flat_grads(egrads) + flat_grads(dgrads)


# --- the estimator ----------------------------------------------------------

class StateAutoEncoder(BaseEstimator, TransformerMixin):
    """Image <-> propositional state autoencoder.

    ``transform`` maps images to ``(n, N)`` uint8 bit vectors (argmax mode),
    ``inverse_transform`` maps bit vectors back to images.

    With ``input_noise > 0`` the encoder sees clipped Gaussian-corrupted
    inputs while the decoder reconstructs the clean ones. ``kl_weight=None``
    picks a per-variant default from ``DEFAULT_KL_WEIGHTS``.
    """

    def __init__(self, n_latent=72, variant="zsae", alpha=0.7, warmup_fraction=1 / 3,
                 hidden=(400, 400), epochs=200, batch_size=64, learning_rate=1e-3,
                 dropout=0.4, tau_max=5.0, tau_min=0.7, kl_weight=None, kl_warmup=0.0,
                 input_noise=0.3, dtype="float32", random_state=0, verbose=False):
        self.n_latent = n_latent
        self.variant = variant
        self.alpha = alpha
        self.warmup_fraction = warmup_fraction
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.tau_max = tau_max
        self.tau_min = tau_min
        self.kl_weight = kl_weight
        self.kl_warmup = kl_warmup
        self.input_noise = input_noise
        self.dtype = dtype
        self.random_state = random_state
        self.verbose = verbose

    @property
    def loss_variant(self):
        alpha = self.alpha if self.variant == "zsae" else 0.0
        return LossVariant(self.variant, alpha, self.warmup_fraction)

    @property
    def effective_kl_weight(self):
        if self.kl_weight is None:
            return DEFAULT_KL_WEIGHTS[self.variant]
        return float(self.kl_weight)

    @property
    def tau_schedule(self):
        return TauSchedule(self.tau_max, self.tau_min)

    def _init_networks(self, n_pixels, rng):
        dt = np.dtype(self.dtype)
        hidden = list(self.hidden)
        n2 = 2 * self.n_latent
        self.encoder_ = Network.build([n_pixels] + hidden + [n2],
                                      ["relu"] * len(hidden) + ["linear"], rng,
                                      self.dropout, dtype=dt)
        self.decoder_ = Network.build([n2] + hidden + [n_pixels],
                                      ["relu"] * len(hidden) + ["sigmoid"], rng,
                                      self.dropout, dtype=dt)

    def fit(self, X, y=None):
        if self.n_latent < 1:
            raise ParameterError("n_latent must be at least 1")
        variant = self.loss_variant
        flat, shape = check_images(X, dtype=np.dtype(self.dtype))
        rng = make_rng(self.random_state)
        self.image_shape_ = shape
        self.n_features_in_ = flat.shape[1]
        self._init_networks(flat.shape[1], rng)
        self.kept_bits_ = np.arange(self.n_latent)

        params = self.encoder_.parameters() + self.decoder_.parameters()
        opt = AdamState.for_params(params, lr=self.learning_rate)
        n = len(flat)
        self.history_ = {"rec": [], "kl": [], "penalty": [], "tau": [], "alpha": []}
        for epoch in range(self.epochs):
            tau = anneal_tau(epoch, self.epochs, self.tau_schedule)
            alpha = variant.effective_alpha(epoch, self.epochs)
            beta = self.effective_kl_weight
            if self.kl_warmup > 0:
                beta *= min(1.0, epoch / (self.kl_warmup * self.epochs))
            order = rng.permutation(n)
            sums = {"rec": 0.0, "kl": 0.0, "penalty": 0.0}
            for start in range(0, n, self.batch_size):
                batch = flat[order[start:start + self.batch_size]]
                noise = sample_gumbel(rng, (len(batch), self.n_latent, 2), flat.dtype)
                inputs = batch
                if self.input_noise > 0:
                    inputs = np.clip(batch + rng.normal(0, self.input_noise, batch.shape),
                                     0, 1).astype(flat.dtype)
                loss, parts, grads = sae_objective(
                    self.encoder_, self.decoder_, inputs, noise, tau, variant, alpha,
                    training=True, rng=rng, kl_weight=beta, target=batch)
                if not np.isfinite(loss):
                    raise TrainingError(f"loss diverged at epoch {epoch}", epoch)
                adam_step(params, grads, opt)
                for k in sums:
                    sums[k] += parts[k] * len(batch)
            for k in sums:
                self.history_[k].append(sums[k] / n)
            self.history_["tau"].append(tau)
            self.history_["alpha"].append(alpha)
            if self.verbose:
                print(f"epoch {epoch:4d} tau {tau:.3f} rec {sums['rec'] / n:9.4f} "
                      f"kl {sums['kl'] / n:8.4f} pen {sums['penalty'] / n:8.4f}")
        self.trained_epochs_ = self.epochs
        return self

    # -- inference --

    @property
    def n_bits_(self):
        return self.encoder_.out_dim // 2

    def encode_logits(self, X):
        check_is_fitted(self, "encoder_")
        flat, _ = check_images(X, self.image_shape_, self.encoder_.dtype)
        return forward(self.encoder_, flat).output.reshape(len(flat), -1, 2)

    def transform(self, X):
        """Deterministic argmax encoding, ``b_n = z_n1``."""
        return argmax_activation(self.encode_logits(X))[..., 1].astype(np.uint8)

    def sample_bits(self, X, tau, rng):
        z = gumbel_softmax(self.encode_logits(X), tau, rng)
        return argmax_activation(z)[..., 1].astype(np.uint8)

    def class_probabilities(self, X):
        return class_probabilities(self.encode_logits(X))

    def decode_latent(self, Z):
        """Decode a ``(n, N, 2)`` latent matrix (one-hot or soft)."""
        check_is_fitted(self, "decoder_")
        Z = np.asarray(Z, dtype=self.decoder_.dtype)
        out = forward(self.decoder_, Z.reshape(len(Z), -1)).output
        return out.reshape((len(Z),) + tuple(self.image_shape_))

    def inverse_transform(self, B):
        B = check_bits(B, self.n_bits_)
        Z = np.stack([1 - B, B], axis=-1)
        return self.decode_latent(Z)

    def reconstruct(self, X):
        return self.inverse_transform(self.transform(X))

    def parameter_arrays(self):
        """Encoder layers first, then decoder; each layer W (row-major) then B."""
        check_is_fitted(self, "encoder_")
        return self.encoder_.parameters() + self.decoder_.parameters()


# --- functional wrappers ----------------------------------------------------

def encode(model, img, mode="argmax", tau=None, rng=None):
    """Encode a single image to a length-N bit vector."""
    img = np.asarray(img)[None]
    if mode == "argmax":
        return model.transform(img)[0]
    if mode != "sample":
        raise ParameterError(f"unknown encode mode {mode!r}")
    if rng is None:
        raise ParameterError("sample mode needs an rng")
    return model.sample_bits(img, tau if tau is not None else model.tau_min, rng)[0]


def decode(model, b):
    b = np.asarray(b)
    if b.ndim != 1:
        raise ShapeError("decode takes a single bit vector")
    return model.inverse_transform(b[None])[0]


def train(model, images, rng=None):
    """Fit ``model`` on ``images``; ``rng`` (an int seed) overrides random_state."""
    if len(images) == 0:
        raise ParameterError("training set is empty")
    if rng is not None:
        model.set_params(random_state=rng)
    return model.fit(images)


def find_constant_bits(model, images):
    """Indices ``n`` whose argmax encoding is 0 on every image."""
    if len(images) == 0:
        raise ParameterError("need at least one image")
    bits = model.transform(images)
    return set(np.flatnonzero(bits.max(axis=0) == 0).tolist())


# --- pruning ----------------------------------------------------------------

@dataclass
class PruneReport:
    delta_n: int
    floats_removed_prev: int
    floats_removed_next: int
    total_before: int
    total_after: int

    @property
    def floats_removed(self):
        return self.floats_removed_prev + self.floats_removed_next


def pruning_savings(n_latent, n_kept, prev_units, next_units):
    """Floats removed from the layer before and the layer after the latent layer.

    Each latent bit is two neurons. The layer feeding them loses
    ``(prev_units + 1)`` floats per neuron (weights + bias); the layer reading
    them loses ``next_units`` weights per neuron.
    """
    delta = n_latent - n_kept
    return (prev_units + 1) * 2 * delta, 2 * next_units * delta


def prune(model, dead, images=None):
    """Remove constant-false bits from a fitted autoencoder.

    For each dead bit ``n`` the decoder's first layer absorbs the weight of
    the always-on false neuron into its bias, then both columns are dropped;
    the encoder's last layer drops the two matching output rows. Pass
    ``images`` to have the dead set verified first.
    """
    check_is_fitted(model, "encoder_")
    dead = sorted(int(i) for i in dead)
    n = model.n_bits_
    if any(i < 0 or i >= n for i in dead):
        raise ContractError(f"dead bit indices must lie in [0, {n})")
    if images is not None:
        live = set(dead) - find_constant_bits(model, images)
        if live:
            raise ContractError(f"bits {sorted(live)} are not constantly false")
    keep = np.setdiff1d(np.arange(n), dead)
    rows = np.stack([2 * keep, 2 * keep + 1], axis=1).reshape(-1)

    enc, dec = model.encoder_.copy(), model.decoder_.copy()
    before = enc.n_parameters() + dec.n_parameters()
    last = enc.layers[-1]
    enc.layers[-1] = DenseLayer(last.W[rows].copy(), last.B[rows].copy(), last.activation)
    first = dec.layers[0]
    bias = first.B.copy()
    for i in dead:
        bias += first.W[:, 2 * i]
    dec.layers[0] = DenseLayer(first.W[:, rows].copy(), bias, first.activation)

    pruned = model.__class__(**model.get_params())
    pruned.set_params(n_latent=len(keep))
    pruned.encoder_, pruned.decoder_ = enc, dec
    pruned.image_shape_ = model.image_shape_
    pruned.n_features_in_ = model.n_features_in_
    pruned.history_ = getattr(model, "history_", None)
    pruned.trained_epochs_ = getattr(model, "trained_epochs_", 0)
    pruned.kept_bits_ = np.asarray(model.kept_bits_)[keep]
    after = enc.n_parameters() + dec.n_parameters()
    prev_removed, next_removed = pruning_savings(n, len(keep), last.in_dim, first.out_dim)
    return pruned, PruneReport(len(dead), prev_removed, next_removed, before, after)
