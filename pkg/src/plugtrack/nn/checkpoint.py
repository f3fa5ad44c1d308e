"""Versioned flat checkpoint files.

Layout (all integers little-endian):
    magic "PTCK" | version u32 | sha256(architecture manifest) 32 bytes |
    n_entries u32 | entries...
Each entry: name, kind (length-prefixed utf-8), dims (u32 count + i64 each),
then arrays (u32 count, each: key, ndim u32, shape i64 each, float64 data).
Loading validates the manifest hash against the receiving network.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .layers import BatchNorm

MAGIC = b"PTCK"
VERSION = 1


def _layer_arrays(layer) -> dict:
    arrays = dict(layer.params)
    if isinstance(layer, BatchNorm):
        arrays["running_mean"] = layer.running_mean
        arrays["running_var"] = layer.running_var
    return arrays


def manifest_hash(layers) -> bytes:
    text = ";".join(
        f"{l.name}:{l.kind}:{','.join(str(d) for d in l.dims)}" for l in layers)
    return hashlib.sha256(text.encode()).digest()


def _pack_str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack("<I", len(raw)) + raw


def save_checkpoint(path, network):
    layers = network.checkpoint_layers()
    parts = [MAGIC, struct.pack("<I", VERSION), manifest_hash(layers)]
    parts.append(struct.pack("<I", len(layers)))
    for layer in layers:
        parts.append(_pack_str(layer.name))
        parts.append(_pack_str(layer.kind))
        parts.append(struct.pack("<I", len(layer.dims)))
        for d in layer.dims:
            parts.append(struct.pack("<q", d))
        arrays = _layer_arrays(layer)
        parts.append(struct.pack("<I", len(arrays)))
        for key, arr in arrays.items():
            parts.append(_pack_str(key))
            parts.append(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                parts.append(struct.pack("<q", d))
            parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated checkpoint file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode()


def load_checkpoint(path, network):
    """Copy checkpoint arrays into a freshly constructed matching network."""
    with open(path, "rb") as f:
        r = _Reader(f.read())
    if r.take(4) != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    layers = network.checkpoint_layers()
    file_hash = r.take(32)
    if file_hash != manifest_hash(layers):
        raise ValueError("checkpoint architecture hash does not match network")
    n = r.u32()
    if n != len(layers):
        raise ValueError("checkpoint layer count mismatch")
    for layer in layers:
        name = r.string()
        kind = r.string()
        dims = tuple(r.i64() for _ in range(r.u32()))
        if name != layer.name or kind != layer.kind or dims != tuple(layer.dims):
            raise ValueError(f"layer mismatch at {name} ({kind} {dims})")
        arrays = _layer_arrays(layer)
        for _ in range(r.u32()):
            key = r.string()
            shape = tuple(r.i64() for _ in range(r.u32()))
            raw = r.take(8 * int(np.prod(shape, dtype=np.int64)))
            values = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
            if key not in arrays or arrays[key].shape != values.shape:
                raise ValueError(f"unexpected array {key} in layer {name}")
            arrays[key][...] = values
