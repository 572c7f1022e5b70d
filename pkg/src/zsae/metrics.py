"""Representation-quality metrics: noise stability, effective bits, reconstruction error."""
import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ParameterError
from .nn import make_rng
from .validation import check_images
from .worlds.noise import NO_NOISE, NoiseSpec, apply_noise

REPORT_COLUMNS = ("world", "variant", "N", "alpha", "noise_kind", "noise_param",
                  "seed_count", "variance", "effective_bits", "mse")


def bit_variance(bits):
    """Population variance of each bit over the first axis."""
    bits = np.asarray(bits, dtype=np.float64)
    return bits.var(axis=0)


def state_variance(model, images, trials=100, noise=NO_NOISE, rng=0):
    """Mean over images and bits of the variance of argmax bits across noisy copies."""
    if trials < 2:
        raise ParameterError("need at least two trials")
    noise = NoiseSpec.parse(noise) if isinstance(noise, str) else noise
    X, _ = check_images(images)
    rng = make_rng(rng)
    total = 0.0
    for x in X:
        copies = apply_noise(np.broadcast_to(x, (trials,) + x.shape), noise, rng)
        total += float(bit_variance(model.transform(copies)).mean())
    return total / len(X)


def effective_bits(model_or_bits, images=None):
    """Number of bits that take both values over the given inputs."""
    B = model_or_bits.transform(images) if images is not None else np.asarray(model_or_bits)
    if B.ndim != 2:
        raise ParameterError("expected a 2-D bit matrix")
    if len(B) == 0:
        return 0
    return int(np.count_nonzero(B.min(axis=0) != B.max(axis=0)))


def reconstruction_mse(model, images):
    X, _ = check_images(images)
    return float(np.mean((model.reconstruct(X).reshape(X.shape) - X) ** 2))


@dataclass
class StabilityReport:
    mean_bit_variance: float
    effective_bits: int
    mse: float
    n_latent: int
    variant: str
    alpha: float
    noise: NoiseSpec
    seeds: list = field(default_factory=list)
    world: str = ""

    def __post_init__(self):
        if not 0.0 <= self.mean_bit_variance <= 0.25 + 1e-12:
            raise ValueError("mean bit variance outside [0, 0.25]")
        if not 0 <= self.effective_bits <= self.n_latent:
            raise ValueError("effective bits outside [0, n_latent]")
        if self.mse < 0:
            raise ValueError("negative mse")

    def row(self):
        return {"world": self.world, "variant": self.variant, "N": self.n_latent,
                "alpha": self.alpha, "noise_kind": self.noise.kind,
                "noise_param": self.noise.param, "seed_count": len(self.seeds),
                "variance": self.mean_bit_variance, "effective_bits": self.effective_bits,
                "mse": self.mse}


def _cell_key(model):
    variant = model.loss_variant
    alpha = variant.alpha if variant.kind == "zsae" else 0.0
    return variant.kind, model.n_bits_, alpha


def representation_report(models, enumeration, noise_specs=("gaussian:0.3",),
                           n_images=100, trials=100, seed=0, world=""):
    """One :class:`StabilityReport` per (variant, N, alpha) x noise cell.

    Models that share a cell are treated as seed replicates; the reported
    values are their medians. Variance uses ``n_images`` images drawn from
    ``enumeration`` with ``seed``; effective bits and MSE use all of it.
    """
    X, _ = check_images(enumeration)
    specs = [NoiseSpec.parse(s) if isinstance(s, str) else s for s in noise_specs]
    pick = make_rng(seed).choice(len(X), size=min(n_images, len(X)), replace=False)
    sample = X[np.sort(pick)]
    groups = {}
    for m in models:
        groups.setdefault(_cell_key(m), []).append(m)
    rows = []
    for (kind, n_bits, alpha), members in groups.items():
        eff = [effective_bits(m, X) for m in members]
        mse = [reconstruction_mse(m, X) for m in members]
        seeds = [m.random_state for m in members]
        for spec in specs:
            var = [state_variance(m, sample, trials, spec, seed) for m in members]
            rows.append(StabilityReport(float(np.median(var)), int(np.median(eff)),
                                        float(np.median(mse)), n_bits, kind, alpha, spec,
                                        seeds, world))
    return rows


def report_csv(rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r.row())
    return buf.getvalue()


def report_json(rows):
    return json.dumps([r.row() for r in rows], indent=2)


def report_dicts(rows):
    return [asdict(r) for r in rows]
