"""Input validation helpers shared by the estimators."""
import numpy as np
from sklearn.utils import check_array

from .exceptions import ShapeError


def check_images(X, image_shape=None, dtype=np.float64):
    """Return ``(flat, image_shape)`` for a stack of images.

    ``X`` may be ``(n, H, W)`` or already flattened ``(n, H*W)``. When
    ``image_shape`` is given the pixel count must match it.
    """
    X = np.asarray(X)
    if X.ndim == 3:
        shape = X.shape[1:]
        flat = X.reshape(len(X), -1)
    elif X.ndim == 2:
        shape = image_shape if image_shape is not None else (1, X.shape[1])
        flat = X
    else:
        raise ShapeError(f"expected a stack of images, got an array of shape {X.shape}")
    flat = check_array(flat, dtype=dtype, ensure_min_samples=1)
    if image_shape is not None:
        if int(np.prod(image_shape)) != flat.shape[1] or (
                X.ndim == 3 and tuple(shape) != tuple(image_shape)):
            raise ShapeError(f"images of shape {tuple(shape)} do not match the "
                             f"model's {tuple(image_shape)}")
        shape = image_shape
    return flat, tuple(shape)


def check_bits(B, n_bits):
    B = np.asarray(B)
    if B.ndim == 1:
        B = B[None, :]
    if B.ndim != 2 or B.shape[1] != n_bits:
        raise ShapeError(f"expected bit vectors of length {n_bits}, got shape {B.shape}")
    if not np.isin(B, (0, 1)).all():
        raise ValueError("bit vectors must contain only 0 and 1")
    return B.astype(np.uint8)


def check_pairs(S, T):
    S = np.asarray(S)
    T = np.asarray(T)
    if S.ndim != 2 or S.shape != T.shape:
        raise ShapeError(f"state pairs must share a 2-D shape, got {S.shape} and {T.shape}")
    if len(S) == 0:
        raise ValueError("need at least one pair")
    return S.astype(np.uint8), T.astype(np.uint8)
