"""Binary model files.

Layout, all integers little-endian u32::

    header   "ZSNN" | version | kind tag (4 bytes) | crc32(header)
    section  tag (4 bytes) | length | payload | crc32(tag, length, payload)
    ...      META (JSON), DIMS (layer shapes), DATA (float32 parameters)
    trailer  crc32 of every preceding byte

``META`` holds the estimator's constructor parameters, latent configuration
and fitted attributes. ``DATA`` stores each network in order (for an
autoencoder the encoder, then the decoder), each layer's ``W`` row-major
followed by ``B``. Parameters are stored as 32-bit floats, so only float32
models round-trip bit-exactly.
"""
import json
import struct
import zlib

import numpy as np

from .exceptions import IntegrityError, ParameterError
from .nn import ACTIVATIONS, DenseLayer, Network

MAGIC = b"ZSNN"
VERSION = 1
_U32 = struct.Struct("<I")
_KIND_TAGS = {"SAE": b"SAE ", "AAE": b"AAE ", "AD": b"AD  "}


def _spec(model):
    from .ama import ActionAutoEncoder, ActionDiscriminator
    from .sae import StateAutoEncoder

    if isinstance(model, StateAutoEncoder):
        return "SAE", ("encoder_", "decoder_"), ("image_shape_", "n_features_in_",
                                                 "kept_bits_", "trained_epochs_")
    if isinstance(model, ActionAutoEncoder):
        return "AAE", ("encoder_", "decoder_"), ("n_bits_",)
    if isinstance(model, ActionDiscriminator):
        return "AD", ("network_",), ("classes_", "n_features_in_")
    raise ParameterError(f"cannot save objects of type {type(model).__name__}")


def _estimator_class(kind):
    from .ama import ActionAutoEncoder, ActionDiscriminator
    from .sae import StateAutoEncoder

    return {"SAE": StateAutoEncoder, "AAE": ActionAutoEncoder, "AD": ActionDiscriminator}[kind]


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.random.Generator):
        return None
    return value


def _section(tag, payload):
    head = tag + _U32.pack(len(payload))
    return head + payload + _U32.pack(zlib.crc32(head + payload))


def dumps(model):
    kind, nets, attrs = _spec(model)
    networks = [getattr(model, n) for n in nets]
    meta = {
        "kind": kind,
        "class": type(model).__name__,
        "params": _jsonable(model.get_params()),
        "attrs": {a: _jsonable(getattr(model, a)) for a in attrs},
        "networks": [{"name": n, "dropout": net.dropout_rate, "side_dim": net.side_dim,
                      "activations": [l.activation for l in net.layers]}
                     for n, net in zip(nets, networks)],
        "history": _jsonable(getattr(model, "history_", None)),
    }
    if kind == "SAE":
        meta["latent"] = {"N": model.n_bits_, "M": 2}
        meta["variant"] = str(model.loss_variant)
    elif kind == "AAE":
        meta["latent"] = {"A": model.n_actions, "N": model.n_bits_}
    dims = [_U32.pack(len(networks))]
    data = []
    for net in networks:
        dims.append(_U32.pack(len(net.layers)))
        for layer in net.layers:
            dims.append(struct.pack("<III", layer.out_dim, layer.in_dim,
                                    ACTIVATIONS.index(layer.activation)))
            data.append(np.ascontiguousarray(layer.W, dtype="<f4").tobytes())
            data.append(np.ascontiguousarray(layer.B, dtype="<f4").tobytes())

    header = MAGIC + _U32.pack(VERSION) + _KIND_TAGS[kind]
    body = (header + _U32.pack(zlib.crc32(header))
            + _section(b"META", json.dumps(meta, sort_keys=True).encode("utf-8"))
            + _section(b"DIMS", b"".join(dims))
            + _section(b"DATA", b"".join(data)))
    return body + _U32.pack(zlib.crc32(body))


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n, section):
        if self.pos + n > len(self.blob):
            raise IntegrityError(f"file truncated inside {section}", section)
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, section):
        return _U32.unpack(self.take(4, section))[0]


def _read_section(reader, expected):
    start = reader.pos
    tag = reader.take(4, expected)
    if tag != expected:
        raise IntegrityError(f"expected section {expected!r}, found {tag!r}", expected.decode())
    length = reader.u32(expected.decode())
    payload = reader.take(length, expected.decode())
    crc = reader.u32(expected.decode())
    if zlib.crc32(reader.blob[start:reader.pos - 4]) != crc:
        raise IntegrityError(f"checksum mismatch in section {expected.decode()}",
                             expected.decode())
    return payload


def loads(blob):
    blob = bytes(blob)
    r = _Reader(blob)
    header = r.take(12, "header")
    if header[:4] != MAGIC:
        raise IntegrityError("not a model file (bad magic)", "header")
    if r.u32("header") != zlib.crc32(header):
        raise IntegrityError("checksum mismatch in header", "header")
    version = _U32.unpack(header[4:8])[0]
    if version != VERSION:
        raise IntegrityError(f"unsupported format version {version}", "header")
    tags = {v: k for k, v in _KIND_TAGS.items()}
    if header[8:12] not in tags:
        raise IntegrityError(f"unknown model kind {header[8:12]!r}", "header")
    kind = tags[header[8:12]]

    meta_raw = _read_section(r, b"META")
    dims_raw = _read_section(r, b"DIMS")
    data_raw = _read_section(r, b"DATA")
    body_end = r.pos
    if r.u32("trailer") != zlib.crc32(blob[:body_end]):
        raise IntegrityError("file checksum mismatch", "trailer")
    if r.pos != len(blob):
        raise IntegrityError("unexpected bytes after the trailer", "trailer")

    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"unreadable metadata: {exc}", "META") from exc
    if meta.get("kind") != kind:
        raise IntegrityError("header kind disagrees with metadata", "META")

    dims = _Reader(dims_raw)
    data = np.frombuffer(data_raw, dtype="<f4")
    offset = 0
    networks = []
    for spec in meta["networks"][:dims.u32("DIMS")]:
        layers = []
        for _ in range(dims.u32("DIMS")):
            out_dim, in_dim, act = struct.unpack("<III", dims.take(12, "DIMS"))
            n_w = out_dim * in_dim
            if offset + n_w + out_dim > len(data):
                raise IntegrityError("parameter data shorter than the layer table", "DATA")
            W = data[offset:offset + n_w].reshape(out_dim, in_dim).astype(np.float32)
            B = data[offset + n_w:offset + n_w + out_dim].astype(np.float32)
            offset += n_w + out_dim
            layers.append(DenseLayer(W, B, ACTIVATIONS[act]))
        networks.append((spec["name"], Network(layers, spec["dropout"], spec["side_dim"])))
    if offset != len(data):
        raise IntegrityError("parameter data longer than the layer table", "DATA")

    params = dict(meta["params"])
    if "hidden" in params:
        params["hidden"] = tuple(params["hidden"])
    model = _estimator_class(kind)(**params)
    for name, net in networks:
        setattr(model, name, net)
    for key, value in meta["attrs"].items():
        if key == "image_shape_":
            value = tuple(value)
        elif isinstance(value, list):
            value = np.asarray(value)
        setattr(model, key, value)
    if meta.get("history") is not None:
        model.history_ = meta["history"]
    return model


def save_model(model, path):
    blob = dumps(model)
    with open(path, "wb") as fh:
        fh.write(blob)
    return path


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
