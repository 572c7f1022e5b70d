"""Binary PGM (P5) and IDX readers/writers.

Pixel values map to gray levels via ``round(v * 255)``; values already on
the 1/255 grid survive a write/read cycle bit-exactly.
"""
import re
import struct

import numpy as np

from ..exceptions import ShapeError

_PGM_HEADER = re.compile(
    rb"^P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")

IDX_UBYTE_3D = 0x00000803
IDX_UBYTE_1D = 0x00000801


def to_gray(img):
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0, 1) * 255).astype(np.uint8)


def write_pgm(path, img):
    img = np.asarray(img)
    if img.ndim != 2:
        raise ShapeError(f"PGM images are 2-D, got shape {img.shape}")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(to_gray(img).tobytes())


def plan_strip(frames, separator=2):
    """Frames side by side with ``separator`` zero-valued columns between them."""
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if not frames:
        raise ShapeError("need at least one frame")
    if any(f.ndim != 2 or f.shape != frames[0].shape for f in frames):
        raise ShapeError("all frames must be 2-D images of one size")
    gap = np.zeros((frames[0].shape[0], separator))
    parts = [frames[0]]
    for f in frames[1:]:
        parts += [gap, f]
    return np.hstack(parts)


def emit_plan_strip(frames, path, separator=2):
    strip = plan_strip(frames, separator)
    write_pgm(path, strip)
    return strip


def read_pgm(path):
    """Return a float64 image in [0, 1]; only 8-bit P5 files are accepted."""
    with open(path, "rb") as f:
        data = f.read()
    m = _PGM_HEADER.match(data)
    if m is None:
        raise ValueError(f"{path}: not a binary (P5) PGM file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=m.end())
    return pixels.reshape(h, w).astype(np.float64) / 255.0


def read_idx(path):
    """Read an IDX file of unsigned bytes (images ``0x803`` or labels ``0x801``)."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 8:
        raise ValueError(f"{path}: too short for an IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in (IDX_UBYTE_3D, IDX_UBYTE_1D):
        raise ValueError(f"{path}: unsupported IDX magic 0x{magic:08x}")
    ndim = magic & 0xFF
    dims = struct.unpack(">" + "I" * ndim, data[4:4 + 4 * ndim])
    offset = 4 + 4 * ndim
    count = int(np.prod(dims))
    if len(data) - offset < count:
        raise ValueError(f"{path}: truncated IDX payload")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=offset).reshape(dims)


def write_idx(path, array):
    array = np.asarray(array, dtype=np.uint8)
    if array.ndim not in (1, 3):
        raise ShapeError("IDX output supports 1-D labels or 3-D image stacks")
    magic = IDX_UBYTE_3D if array.ndim == 3 else IDX_UBYTE_1D
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        f.write(struct.pack(">" + "I" * array.ndim, *array.shape))
        f.write(array.tobytes())


def resize_area(img, shape):
    """Resize by box averaging over the source footprint of each output pixel."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    oh, ow = shape
    ys = np.linspace(0, h, oh + 1)
    xs = np.linspace(0, w, ow + 1)
    out = np.empty((oh, ow))
    for i in range(oh):
        y0, y1 = int(np.floor(ys[i])), max(int(np.ceil(ys[i + 1])), int(np.floor(ys[i])) + 1)
        for j in range(ow):
            x0, x1 = int(np.floor(xs[j])), max(int(np.ceil(xs[j + 1])), int(np.floor(xs[j])) + 1)
            out[i, j] = img[y0:y1, x0:x1].mean()
    return out
