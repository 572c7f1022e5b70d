"""Rendering puzzle states to grayscale images and reading them back."""
import functools

import numpy as np

from ..exceptions import ShapeError
from .core import is_valid_state
from .imageio import read_idx, read_pgm, resize_area

LIGHT_ON = 0.9
LIGHT_OFF = 0.1
LIGHT_BORDER = 0.0

# 5x7 bitmap digits
_GLYPHS = {
    0: ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    1: ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    2: ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    3: ["11111", "00010", "00100", "00010", "00001", "10001", "01110"],
    4: ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    5: ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    6: ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    7: ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    8: ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    9: ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
}


def glyph(digit):
    return np.array([[c == "1" for c in row] for row in _GLYPHS[digit]], dtype=np.float64)


def _glyph_tile(digit, res):
    """Digit bitmap scaled by the largest integer factor that fits, centred."""
    g = glyph(digit % 10)
    scale = max(1, min((res - 2) // 5, (res - 2) // 7))
    g = np.kron(g, np.ones((scale, scale)))
    tile = np.zeros((res, res))
    gh, gw = min(g.shape[0], res), min(g.shape[1], res)
    y0, x0 = (res - gh) // 2, (res - gw) // 2
    tile[y0:y0 + gh, x0:x0 + gw] = g[:gh, :gw]
    return tile


@functools.lru_cache(maxsize=32)
def _tile_bank(rows, cols, res, source, path, labels_path):
    n = rows * cols
    if source == "builtin_glyphs":
        tiles = [_glyph_tile(k, res) for k in range(n)]
    elif source == "external_image":
        # the picture is cut into n pieces; piece k is tile k
        picture = resize_area(read_pgm(path), (rows * res, cols * res))
        tiles = [picture[(k // cols) * res:(k // cols + 1) * res,
                         (k % cols) * res:(k % cols + 1) * res].copy()
                 for k in range(n)]
    else:
        images = read_idx(path).astype(np.float64) / 255.0
        if labels_path is not None:
            labels = read_idx(labels_path)
            picks = [int(np.flatnonzero(labels == k % 10)[0]) for k in range(n)]
        else:
            picks = list(range(n))
        tiles = [resize_area(images[i], (res, res)) for i in picks]
    return np.stack(tiles)


def tile_bank(config):
    """Reference image of every tile, shape ``(n_tiles, res, res)``."""
    return _tile_bank(config.rows, config.cols, config.resolution,
                      config.tile_source, config.tile_path, config.labels_path)


def _cell(img, i, config):
    r, c = divmod(i, config.cols)
    res = config.resolution
    return img[r * res:(r + 1) * res, c * res:(c + 1) * res]


def _render_plain(state, config):
    img = np.zeros(config.image_shape)
    if config.is_lights:
        res = config.resolution
        for i, on in enumerate(state):
            cell = _cell(img, i, config)
            if on:
                cell[:] = LIGHT_BORDER
                cell[1:res - 1, 1:res - 1] = LIGHT_ON
            else:
                cell[:] = LIGHT_OFF
        return img
    bank = tile_bank(config)
    for i, tile in enumerate(state):
        _cell(img, i, config)[:] = bank[tile]
    return img


def render(state, config):
    if not is_valid_state(state, config):
        raise ValueError(f"invalid state for {config.name}: {state}")
    img = _render_plain(state, config)
    if config.kind == "twisted_lights_out":
        img = swirl(img, config.swirl_strength)
    return img


@functools.lru_cache(maxsize=16)
def _swirl_coords(shape, strength):
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    radius = min(h, w) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    r = np.hypot(dy, dx)
    theta = np.arctan2(dy, dx) + strength * np.clip(1.0 - r / radius, 0.0, None)
    return cy + r * np.sin(theta), cx + r * np.cos(theta)


def _bilinear(img, sy, sx):
    h, w = img.shape
    sy = np.clip(sy, 0, h - 1)
    sx = np.clip(sx, 0, w - 1)
    y0 = np.minimum(np.floor(sy).astype(int), max(h - 2, 0))
    x0 = np.minimum(np.floor(sx).astype(int), max(w - 2, 0))
    fy, fx = sy - y0, sx - x0
    y1, x1 = np.minimum(y0 + 1, h - 1), np.minimum(x0 + 1, w - 1)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def swirl(img, strength):
    """Rotate each pixel about the centre by ``strength * (1 - r/R)`` radians."""
    if strength == 0:
        return np.array(img, dtype=np.float64)
    sy, sx = _swirl_coords(np.shape(img), float(strength))
    return _bilinear(np.asarray(img, dtype=np.float64), sy, sx)


def unswirl(img, strength):
    return swirl(img, -strength)


@functools.lru_cache(maxsize=16)
def _interior_weights_cached(n, res, kind, strength):
    masks = np.zeros((n * n, n * res, n * res))
    for i in range(n * n):
        r, c = divmod(i, n)
        masks[i, r * res + 1:(r + 1) * res - 1, c * res + 1:(c + 1) * res - 1] = 1.0
        if kind == "twisted_lights_out":
            # warping the mask instead of un-warping the image keeps noise unblurred
            masks[i] = swirl(masks[i], strength)
        masks[i] /= masks[i].sum()
    return masks


def _interior_weights(config):
    """Per-cell averaging weights over the interior of each light."""
    return _interior_weights_cached(config.rows, config.resolution, config.kind,
                                    float(config.swirl_strength))


def _classify(img, config):
    """Return ``(state, None)`` or ``(None, reason)``."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape != config.image_shape:
        raise ShapeError(f"image {img.shape} does not match world {config.image_shape}")
    if config.is_lights:
        mid = (LIGHT_ON + LIGHT_OFF) / 2
        min_margin = config.margin * (LIGHT_ON - LIGHT_OFF)
        weights = _interior_weights(config)
        levels = weights.reshape(config.n_cells, -1) @ img.reshape(-1)
        state = []
        for i, level in enumerate(levels):
            if abs(level - mid) < min_margin:
                return None, f"cell {i} is ambiguous (mean {level:.3f})"
            state.append(int(level > mid))
        return tuple(state), None

    bank = tile_bank(config)
    flat_bank = bank.reshape(len(bank), -1)
    gaps = ((flat_bank[:, None, :] - flat_bank[None, :, :]) ** 2).sum(-1)
    ref_gap = gaps[~np.eye(len(bank), dtype=bool)].min()
    state = []
    for i in range(config.n_cells):
        d = ((flat_bank - _cell(img, i, config).reshape(-1)) ** 2).sum(-1)
        order = np.argsort(d, kind="stable")
        if (d[order[1]] - d[order[0]]) / ref_gap < config.margin:
            return None, f"cell {i} is ambiguous between tiles {order[0]} and {order[1]}"
        state.append(int(order[0]))
    if sorted(state) != list(range(config.n_cells)):
        return None, f"duplicate tiles in {tuple(state)}"
    return tuple(state), None


def classify_image(img, config):
    """Recover the world state shown in ``img``, or ``None`` if unreadable."""
    return _classify(img, config)[0]
