"""Self-describing binary checkpoints with named float64 tensors.

Layout (all integers little-endian, documented in docs/formats.md):

    magic   4 bytes  b"CTCK"
    version 1 byte   currently 1
    u32 metadata length, then that many bytes of UTF-8 JSON
    u32 tensor count
    per tensor:
        u16 name length, name bytes (UTF-8)
        u8 ndim, then ndim * u32 dimensions
        u64 payload length, then row-major float64 bytes

Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"CTCK"
VERSION = 1


def save_checkpoint(tensors, metadata):
    """Serialize a name -> array mapping plus a JSON-compatible metadata dict."""
    names = list(tensors)
    if len(set(names)) != len(names):
        raise CheckpointError("tensor names must be unique")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<B", VERSION)
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    out += struct.pack("<I", len(meta))
    out += meta
    out += struct.pack("<I", len(names))
    for name in names:
        arr = np.ascontiguousarray(np.asarray(tensors[name], dtype=np.float64))
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            out += struct.pack("<I", dim)
        payload = arr.tobytes()
        out += struct.pack("<Q", len(payload))
        out += payload
    return bytes(out)


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise CheckpointError("truncated checkpoint")
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def load_checkpoint(blob):
    """Parse checkpoint bytes back into (tensors, metadata)."""
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    version = r.unpack("<B")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    meta_len = r.unpack("<I")
    try:
        metadata = json.loads(r.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt metadata block: {exc}") from exc
    count = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        name_len = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        ndim = r.unpack("<B")
        shape = tuple(r.unpack("<I") for _ in range(ndim))
        payload_len = r.unpack("<Q")
        expected = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        if payload_len != expected:
            raise CheckpointError(f"tensor {name!r}: payload length {payload_len} does not match shape {shape}")
        data = np.frombuffer(r.take(payload_len), dtype="<f8").reshape(shape)
        if name in tensors:
            raise CheckpointError(f"duplicate tensor name {name!r}")
        tensors[name] = data.copy()
    if r.pos != len(blob):
        raise CheckpointError("trailing bytes after final tensor")
    return tensors, metadata


def write_checkpoint(path, tensors, metadata):
    blob = save_checkpoint(tensors, metadata)
    with open(path, "wb") as fh:
        fh.write(blob)


def read_checkpoint(path):
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read())


def load_parameters(params, tensors, skip=()):
    """Copy checkpoint arrays into named parameters, validating shapes.

    ``skip`` names tensors that are allowed to be absent from ``tensors``
    (used when restoring an encoder without its head).  Any checkpoint
    tensor that does not match a parameter name is an error.
    """
    by_name = {p.name: p for p in params}
    for name in tensors:
        if name in skip:
            continue
        if name not in by_name:
            raise CheckpointError(f"unknown parameter name {name!r} in checkpoint")
    for name, p in by_name.items():
        if name in skip:
            continue
        if name not in tensors:
            raise CheckpointError(f"checkpoint is missing tensor {name!r}")
        arr = tensors[name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"tensor {name!r}: checkpoint shape {arr.shape} does not match model shape {p.data.shape}")
        p.data = arr.astype(np.float64).copy()
