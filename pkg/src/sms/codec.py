"""Spike codecs: real values <-> binary spike trains.

A spike train is a ``uint8`` array of shape ``(..., steps, channels)``; row ``k``
is spike step ``k`` and column ``j`` is channel ``j``. All encoders accept
leading batch dimensions on ``values`` (shape ``(..., channels)``).

Three codecs are provided:

* lower-triangular: ``round(steps * v)`` leading ones per channel,
* rate: independent Bernoulli draws with the normalized value as probability,
* float32: the 32 IEEE-754 bits, sign in row 0, mantissa LSB in row 31.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

LOWER_TRIANGULAR = "lower_triangular"
RATE = "rate"
FLOAT32 = "float32"
ENCODER_KINDS = (LOWER_TRIANGULAR, RATE, FLOAT32)
FLOAT32_STEPS = 32


@dataclass
class NormRange:
    """Bounds used to map physical values onto ``[0, 1]``.

    ``lo`` and ``hi`` are scalars when the range is shared by every channel,
    or 1-D arrays (one entry per channel) when ``per_channel`` is set.
    """

    lo: np.ndarray | float
    hi: np.ndarray | float
    per_channel: bool = False

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must have the same shape")
        if not self.per_channel and self.lo.ndim != 0:
            raise ValueError("a shared range needs scalar bounds")
        if not np.all(np.isfinite(self.lo)) or not np.all(np.isfinite(self.hi)):
            raise ValueError("range bounds must be finite")
        if np.any(self.hi <= self.lo):
            raise ValueError(f"range needs hi > lo, got lo={self.lo}, hi={self.hi}")

    @property
    def span(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def n_entries(self) -> int:
        return int(self.lo.size)

    def tile(self, reps: int) -> "NormRange":
        """Range for a window of ``reps`` consecutive state vectors."""
        if not self.per_channel:
            return self
        return NormRange(np.tile(self.lo, reps), np.tile(self.hi, reps), True)

    @classmethod
    def from_data(cls, data, margin: float = 0.1, per_channel: bool = True,
                  min_span: float = 1e-8) -> "NormRange":
        """Fit bounds to ``data`` (rows = samples) and widen by ``margin`` of the span per side.

        A constant channel gets an artificial span of ``max(|value|, 1)`` and a warning.
        """
        data = np.asarray(data, dtype=np.float64)
        if per_channel:
            lo, hi = data.min(axis=0), data.max(axis=0)
        else:
            lo, hi = np.asarray(data.min()), np.asarray(data.max())
        span = hi - lo
        flat = span < min_span
        if np.any(flat):
            log.warning("degenerate range on %d channel(s); widening artificially", int(np.sum(flat)))
            span = np.where(flat, np.maximum(np.abs(lo), 1.0), span)
            mid = 0.5 * (lo + hi)
            lo = np.where(flat, mid - 0.5 * span, lo)
            hi = np.where(flat, mid + 0.5 * span, hi)
        return cls(lo - margin * span, hi + margin * span, per_channel)

    def __eq__(self, other):
        if not isinstance(other, NormRange):
            return NotImplemented
        return (self.per_channel == other.per_channel
                and np.array_equal(self.lo, other.lo)
                and np.array_equal(self.hi, other.hi))


def count_out_of_range(values, rng: NormRange) -> int:
    values = np.asarray(values, dtype=np.float64)
    return int(np.sum((values < rng.lo) | (values > rng.hi)))


def normalize(values, rng: NormRange) -> np.ndarray:
    """Map to ``[0, 1]`` and clamp; clamping never raises."""
    values = np.asarray(values, dtype=np.float64)
    n_clamped = count_out_of_range(values, rng)
    if n_clamped:
        log.debug("normalize clamped %d value(s)", n_clamped)
    return np.clip((values - rng.lo) / rng.span, 0.0, 1.0)


def _ones_fraction(train) -> np.ndarray:
    train = np.asarray(train)
    return train.sum(axis=-2, dtype=np.int64) / train.shape[-2]


def encode_lower_triangular(values, rng: NormRange, steps: int) -> np.ndarray:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    k = np.floor(steps * normalize(values, rng) + 0.5)
    rows = np.arange(steps).reshape(steps, 1)
    return (rows < k[..., None, :]).astype(np.uint8)


def decode_lower_triangular(train, rng: NormRange) -> np.ndarray:
    # counts ones anywhere in the column; network outputs need not be prefix-shaped
    return rng.lo + _ones_fraction(train) * rng.span


def encode_rate(values, rng: NormRange, steps: int, seed) -> np.ndarray:
    """Bernoulli spikes from a counter-based (Philox) stream keyed by ``seed``.

    ``seed`` may be an int or a sequence of ints (e.g. ``(base_seed, timestep)``).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    p = normalize(values, rng)
    gen = np.random.Generator(np.random.Philox(seed))
    shape = p.shape[:-1] + (steps, p.shape[-1])
    u = gen.random(shape)
    return (u < p[..., None, :]).astype(np.uint8)


def decode_rate(train, rng: NormRange) -> np.ndarray:
    return rng.lo + _ones_fraction(train) * rng.span


_BIT_SHIFTS = np.arange(31, -1, -1, dtype=np.uint32)


def encode_float32(values) -> np.ndarray:
    bits = np.asarray(values, dtype=np.float32).view(np.uint32)
    out = (bits[..., None, :] >> _BIT_SHIFTS[:, None]) & np.uint32(1)
    return out.astype(np.uint8)


def decode_float32(train) -> np.ndarray:
    train = np.asarray(train)
    if train.shape[-2] != FLOAT32_STEPS:
        raise ValueError(f"float32 trains need {FLOAT32_STEPS} steps, got {train.shape[-2]}")
    words = (train.astype(np.uint32) << _BIT_SHIFTS[:, None]).sum(axis=-2, dtype=np.uint32)
    return words.view(np.float32).astype(np.float64)


@dataclass(frozen=True)
class Encoder:
    """Encoder choice plus the spike-train length it produces.

    The float32 encoder always uses 32 steps regardless of ``steps``.
    """

    kind: str = LOWER_TRIANGULAR
    steps: int = 100
    seed: int = field(default=0)

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder {self.kind!r}; expected one of {ENCODER_KINDS}")
        if self.kind == FLOAT32:
            object.__setattr__(self, "steps", FLOAT32_STEPS)
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    def encode(self, values, rng: NormRange | None = None, seed=None) -> np.ndarray:
        if self.kind == FLOAT32:
            return encode_float32(values)
        if rng is None:
            raise ValueError(f"{self.kind} encoding needs a NormRange")
        if self.kind == LOWER_TRIANGULAR:
            return encode_lower_triangular(values, rng, self.steps)
        return encode_rate(values, rng, self.steps, self.seed if seed is None else seed)

    def decode(self, train, rng: NormRange | None = None) -> np.ndarray:
        if self.kind == FLOAT32:
            return decode_float32(train)
        if rng is None:
            raise ValueError(f"{self.kind} decoding needs a NormRange")
        if self.kind == LOWER_TRIANGULAR:
            return decode_lower_triangular(train, rng)
        return decode_rate(train, rng)


def encoding_error(signal, encoder: Encoder, rng: NormRange | None = None) -> tuple[float, float]:
    """Mean squared round-trip error and the same divided by the signal's mean square."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.size == 0:
        raise ValueError("signal must be nonempty")
    decoded = encoder.decode(encoder.encode(signal, rng), rng)
    l2 = float(np.mean((decoded - signal) ** 2))
    return l2, l2 / float(np.mean(signal ** 2))


def check_train(train) -> np.ndarray:
    train = np.asarray(train)
    if train.ndim < 2 or train.shape[-1] < 1 or train.shape[-2] < 1:
        raise ValueError(f"spike train needs shape (..., steps>=1, channels>=1), got {train.shape}")
    if not np.all((train == 0) | (train == 1)):
        raise ValueError("spike train entries must be 0 or 1")
    return train.astype(np.uint8, copy=False)


def train_to_text(train) -> str:
    train = check_train(train)
    return "\n".join("".join("1" if b else "0" for b in row) for row in train) + "\n"


def train_from_text(text: str) -> np.ndarray:
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows or len({len(r) for r in rows}) != 1 or set("".join(rows)) - {"0", "1"}:
        raise ValueError("malformed spike-train text")
    return np.array([[c == "1" for c in r] for r in rows], dtype=np.uint8)


def pack_train(train) -> bytes:
    """Row-major bits, 8 per byte (MSB first), zero-padded at the end."""
    return np.packbits(check_train(train).reshape(-1)).tobytes()


def unpack_train(data: bytes, steps: int, channels: int) -> np.ndarray:
    n = steps * channels
    if len(data) != (n + 7) // 8:
        raise ValueError("packed spike train has the wrong length")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=n)
    return bits.reshape(steps, channels)
