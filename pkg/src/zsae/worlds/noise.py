"""Observation noise models."""
from dataclasses import dataclass

import numpy as np

from ..exceptions import ParameterError

NOISE_KINDS = ("none", "gaussian", "salt_pepper")
_ALIASES = {"gauss": "gaussian", "sp": "salt_pepper", "saltpepper": "salt_pepper",
            "salt-pepper": "salt_pepper", "clean": "none"}


@dataclass(frozen=True)
class NoiseSpec:
    """``param`` is sigma for gaussian noise and the flip probability for salt/pepper."""

    kind: str = "none"
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.param < 0 or (self.kind == "salt_pepper" and self.param > 1):
            raise ParameterError(f"bad {self.kind} parameter {self.param}")

    @classmethod
    def parse(cls, text):
        """``none``, ``gaussian:0.3``, ``salt_pepper:0.06`` (aliases ``gauss``, ``sp``)."""
        kind, _, value = text.strip().partition(":")
        kind = _ALIASES.get(kind.lower(), kind.lower())
        if kind == "none":
            return cls()
        if not value:
            raise ParameterError(f"noise {text!r} needs a parameter, e.g. {kind}:0.3")
        return cls(kind, float(value))

    def __str__(self):
        return "none" if self.kind == "none" else f"{self.kind}:{self.param:g}"


NO_NOISE = NoiseSpec()


def apply_noise(img, spec, rng):
    img = np.asarray(img, dtype=np.float64)
    if spec.kind == "none" or spec.param == 0:
        return img.copy()
    if spec.kind == "gaussian":
        return np.clip(img + rng.normal(0.0, spec.param, size=img.shape), 0.0, 1.0)
    hit = rng.random(img.shape) < spec.param
    salt = rng.random(img.shape) < 0.5
    return np.where(hit, salt.astype(np.float64), img)
