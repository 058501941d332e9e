"""Binary checkpoints.

Layout: ``b"SYMK1"``, the symmetry level as one byte, then for each
layer (dense blocks in order, then the head) a little-endian u64 count
followed by that many little-endian f64 values: kernels row-major
``(out, in, free)`` then biases; for the head, weight ``(features,
classes)`` then bias.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from symkernels.nn.network import Network

MAGIC = b"SYMK1"


class CheckpointError(ValueError):
    pass


def encode_checkpoint(net: Network) -> bytes:
    parts = [MAGIC, bytes([net.level])]
    for group in net.layer_groups():
        values = np.concatenate([a.ravel() for a in group]).astype("<f8")
        parts.append(struct.pack("<Q", values.size))
        parts.append(values.tobytes())
    return b"".join(parts)


def save_checkpoint(net: Network, path) -> None:
    Path(path).write_bytes(encode_checkpoint(net))


def decode_checkpoint(raw: bytes, source="<bytes>", **architecture) -> Network:
    """Rebuild a network; ``architecture`` overrides the default configuration."""
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{source}: bad magic {raw[:len(MAGIC)]!r}, expected {MAGIC!r}")
    pos = len(MAGIC)
    if len(raw) < pos + 1:
        raise CheckpointError(f"{source}: truncated before the level byte")
    level = raw[pos]
    pos += 1
    if level > 4:
        raise CheckpointError(f"{source}: invalid symmetry level {level}")
    net = Network(level, **architecture)
    for i, group in enumerate(net.layer_groups()):
        expected = sum(a.size for a in group)
        if len(raw) < pos + 8:
            raise CheckpointError(f"{source}: truncated at offset {pos} (layer {i} count)")
        (count,) = struct.unpack_from("<Q", raw, pos)
        pos += 8
        if count != expected:
            raise CheckpointError(
                f"{source}: layer {i} has {count} values, level-{level} network expects {expected}"
            )
        end = pos + 8 * count
        if len(raw) < end:
            raise CheckpointError(
                f"{source}: truncated at offset {len(raw)} inside layer {i} (needs {end} bytes)"
            )
        values = np.frombuffer(raw, dtype="<f8", count=count, offset=pos)
        offset = 0
        for arr in group:
            arr[...] = values[offset : offset + arr.size].reshape(arr.shape)
            offset += arr.size
        pos = end
    if pos != len(raw):
        raise CheckpointError(f"{source}: {len(raw) - pos} trailing bytes after the last layer")
    if not np.all(np.isfinite(net.flat)):
        raise CheckpointError(f"{source}: non-finite parameter values")
    return net


def load_checkpoint(path, **architecture) -> Network:
    path = Path(path)
    return decode_checkpoint(path.read_bytes(), source=str(path), **architecture)
