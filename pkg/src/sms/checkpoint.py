"""Binary checkpoint for a trained network and its normalization ranges.

Layout (little-endian)::

    b"SMSCKPT1"
    int64 x4     steps, n_in, n_out, hidden
    float64 x2   LIF decay, threshold
    uint8 x2     reset (0 = subtract, 1 = zero), literal_relu flag
    uint8        range is per-channel
    int64        number of range entries R (0 when the encoder needs none)
    float64 x2R  (lo, hi) pairs
    float64      w1, b1, w2, b2, each row-major
    uint64       byte length of everything above (integrity check)
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .codec import NormRange
from .network import SUBTRACT, ZERO, LifConfig, Network

MAGIC = b"SMSCKPT1"
_RESETS = (SUBTRACT, ZERO)


class CheckpointError(ValueError):
    pass


def dumps(net: Network, rng: NormRange | None) -> bytes:
    parts = [MAGIC,
             struct.pack("<4q", net.steps, net.n_in, net.n_out, net.hidden),
             struct.pack("<2d", net.lif.decay, net.lif.threshold),
             struct.pack("<2B", _RESETS.index(net.lif.reset), int(net.literal_relu))]
    if rng is None:
        parts.append(struct.pack("<Bq", 0, 0))
    else:
        lo, hi = np.atleast_1d(rng.lo), np.atleast_1d(rng.hi)
        parts.append(struct.pack("<Bq", int(rng.per_channel), lo.size))
        parts.append(np.column_stack([lo, hi]).astype("<f8").tobytes())
    for p in net.params:
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<Q", len(body))


def loads(data: bytes, expect_shape: tuple | None = None) -> tuple[Network, NormRange | None]:
    """Parse a checkpoint; ``expect_shape`` is ``(steps, n_in, n_out)`` or with ``hidden`` appended."""
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    if len(data) < 16 or struct.unpack("<Q", data[-8:])[0] != len(data) - 8:
        raise CheckpointError("checkpoint is truncated or corrupted")
    pos = 8
    steps, n_in, n_out, hidden = struct.unpack_from("<4q", data, pos)
    pos += 32
    shape = (steps, n_in, n_out, hidden)
    if expect_shape is not None and tuple(expect_shape) != shape[:len(expect_shape)]:
        raise CheckpointError(f"checkpoint shape {shape[:len(expect_shape)]} does not match expected {tuple(expect_shape)}")
    decay, threshold = struct.unpack_from("<2d", data, pos)
    pos += 16
    reset, literal = struct.unpack_from("<2B", data, pos)
    pos += 2
    per_channel, n_range = struct.unpack_from("<Bq", data, pos)
    pos += 9
    rng = None
    if n_range:
        pairs = np.frombuffer(data, dtype="<f8", count=2 * n_range, offset=pos).reshape(n_range, 2)
        pos += 16 * n_range
        if per_channel:
            rng = NormRange(pairs[:, 0].copy(), pairs[:, 1].copy(), True)
        else:
            rng = NormRange(pairs[0, 0], pairs[0, 1], False)
    net = Network(steps, n_in, n_out, hidden, LifConfig(decay, threshold, _RESETS[reset]), bool(literal))
    for p in net.params:
        p[...] = np.frombuffer(data, dtype="<f8", count=p.size, offset=pos).reshape(p.shape)
        pos += 8 * p.size
    if pos != len(data) - 8:
        raise CheckpointError("checkpoint length does not match its header")
    return net, rng


def save(net: Network, rng: NormRange | None, path) -> Path:
    path = Path(path)
    path.write_bytes(dumps(net, rng))
    return path


def load(path, expect_shape: tuple | None = None) -> tuple[Network, NormRange | None]:
    return loads(Path(path).read_bytes(), expect_shape)
