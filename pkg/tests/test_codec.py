import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sms.codec import (FLOAT32, LOWER_TRIANGULAR, RATE, Encoder, NormRange, decode_float32,
                       decode_lower_triangular, decode_rate, encode_float32, encode_lower_triangular,
                       encode_rate, encoding_error, normalize, pack_train, train_from_text, train_to_text,
                       unpack_train)

UNIT = NormRange(0.0, 1.0)


def test_normalize_endpoints_and_identity():
    rng = NormRange(-2.0, 3.0)
    assert normalize([-2.0], rng).tolist() == [0.0]
    assert normalize([3.0], rng).tolist() == [1.0]
    assert normalize([0.4], UNIT).tolist() == [0.4]


def test_normalize_clamps_out_of_range():
    assert normalize([-5.0, 0.5, 7.0], UNIT).tolist() == [0.0, 0.5, 1.0]


def test_range_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        NormRange(1.0, 1.0)
    with pytest.raises(ValueError):
        NormRange([0.0, 2.0], [1.0, 1.0], per_channel=True)


def test_range_from_data_widens_and_handles_constant_channel(caplog):
    data = np.array([[0.0, 5.0], [1.0, 5.0]])
    rng = NormRange.from_data(data, margin=0.1)
    assert rng.lo[0] == pytest.approx(-0.1) and rng.hi[0] == pytest.approx(1.1)
    assert rng.hi[1] > rng.lo[1]
    assert "degenerate" in caplog.text


def test_lower_triangular_worked_example():
    train = encode_lower_triangular([0.4], UNIT, 10)
    assert train[:, 0].tolist() == [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
    assert decode_lower_triangular(train, UNIT).tolist() == [0.4]


@pytest.mark.parametrize("steps", [1, 7, 50])
def test_lower_triangular_limits(steps):
    rng = NormRange(-1.0, 2.0)
    assert not encode_lower_triangular([-1.0], rng, steps).any()
    assert encode_lower_triangular([2.0], rng, steps).all()
    assert decode_lower_triangular(np.zeros((steps, 1), np.uint8), rng).tolist() == [-1.0]


@pytest.mark.parametrize("steps", [3, 10, 64])
def test_lower_triangular_exact_on_grid(steps):
    values = np.arange(steps + 1) / steps
    decoded = decode_lower_triangular(encode_lower_triangular(values, UNIT, steps), UNIT)
    assert np.array_equal(decoded, values)


def test_decode_counts_ones_anywhere():
    train = np.array([[0], [1], [0], [1]], dtype=np.uint8)
    assert decode_lower_triangular(train, UNIT).tolist() == [0.5]


def test_rate_extremes_ignore_seed():
    for seed in (0, 1, 12345):
        assert not encode_rate([0.0], UNIT, 50, seed).any()
        assert encode_rate([1.0], UNIT, 50, seed).all()


def test_rate_is_deterministic_per_seed():
    a = encode_rate([0.3, 0.7], UNIT, 40, 9)
    assert np.array_equal(a, encode_rate([0.3, 0.7], UNIT, 40, 9))
    assert not np.array_equal(a, encode_rate([0.3, 0.7], UNIT, 40, 10))


def test_rate_decode_matches_direct_count():
    train = encode_rate([0.3], UNIT, 10, 4)
    assert decode_rate(train, UNIT)[0] == train[:, 0].sum() / 10


def test_rate_decode_simple_columns():
    assert decode_rate(np.ones((6, 1), np.uint8), UNIT).tolist() == [1.0]
    assert decode_rate(np.array([[1], [0], [1], [0]], np.uint8), UNIT).tolist() == [0.5]


def test_rate_mean_over_seeds():
    means = [decode_rate(encode_rate([0.4], UNIT, 1000, s), UNIT)[0] for s in range(100)]
    assert abs(np.mean(means) - 0.4) < 0.05


def _bit_dump(value: float) -> str:
    return format(struct.unpack(">I", struct.pack(">f", value))[0], "032b")


def test_float32_zero_and_one_bits():
    assert not encode_float32([0.0]).any()
    bits = "".join(str(b) for b in encode_float32([1.0])[:, 0])
    assert bits == _bit_dump(1.0) == "0" + "01111111" + "0" * 23


@pytest.mark.parametrize("value", [-2.5, 3.0e-38, 1.0e30, 0.1])
def test_float32_matches_bit_dump(value):
    bits = "".join(str(b) for b in encode_float32([value])[:, 0])
    assert bits == _bit_dump(value)


def test_float32_round_trip_is_bit_exact():
    gen = np.random.default_rng(0)
    x = gen.integers(0, 2 ** 32, size=1000, dtype=np.uint64).astype(np.uint32).view(np.float32)
    x = x[np.isfinite(x)]
    back = decode_float32(encode_float32(x)).astype(np.float32)
    assert np.array_equal(back.view(np.uint32), x.view(np.uint32))


def test_encoder_float32_forces_32_steps():
    assert Encoder(FLOAT32, steps=7).steps == 32


def test_encoder_rejects_unknown_kind():
    with pytest.raises(ValueError):
        Encoder("latency")


def test_encoder_dispatch_round_trips():
    rng = NormRange(0.0, 2.0)
    v = np.array([0.5, 1.5])
    for kind in (LOWER_TRIANGULAR, RATE):
        enc = Encoder(kind, 200, seed=3)
        assert np.all(np.abs(enc.decode(enc.encode(v, rng), rng) - v) < 0.3)


def test_batched_encoding_matches_rowwise():
    rng = NormRange(-1.0, 1.0)
    rows = np.array([[0.1, -0.4], [0.9, 0.0]])
    batched = encode_lower_triangular(rows, rng, 12)
    for i, row in enumerate(rows):
        assert np.array_equal(batched[i], encode_lower_triangular(row, rng, 12))


def test_encoding_error_of_exact_signal_is_zero():
    signal = np.array([0.0, 0.25, 0.5, 1.0])
    l2, rel = encoding_error(signal, Encoder(LOWER_TRIANGULAR, 4), UNIT)
    assert l2 == 0.0 and rel == 0.0


def test_text_and_packed_serialization_round_trip():
    train = encode_rate([0.2, 0.5, 0.9], UNIT, 11, 1)
    assert np.array_equal(train_from_text(train_to_text(train)), train)
    packed = pack_train(train)
    assert len(packed) == (11 * 3 + 7) // 8
    assert np.array_equal(unpack_train(packed, 11, 3), train)


def test_text_form_layout():
    train = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    assert train_to_text(train) == "10\n11\n"
    with pytest.raises(ValueError):
        train_from_text("10\n1\n")


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=20), st.integers(1, 300))
def test_lower_triangular_properties(values, steps):
    rng = NormRange(-100.0, 100.0)
    train = encode_lower_triangular(values, rng, steps)
    assert set(np.unique(train)) <= {0, 1}
    # prefix property: ones never follow a zero within a column
    assert np.all(np.diff(train.astype(int), axis=0) <= 0)
    decoded = decode_lower_triangular(train, rng)
    clamped = np.clip(values, -100.0, 100.0)
    assert np.all(np.abs(decoded - clamped) <= 200.0 / (2 * steps) + 1e-9)
    permuted = train[np.random.default_rng(0).permutation(steps)]
    assert np.array_equal(decode_lower_triangular(permuted, rng), decoded)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.integers(1, 100), st.integers(0, 2 ** 63))
def test_rate_binarity_and_determinism(values, steps, seed):
    a = encode_rate(values, UNIT, steps, seed)
    assert set(np.unique(a)) <= {0, 1}
    assert np.array_equal(a, encode_rate(values, UNIT, steps, seed))


@settings(max_examples=200, deadline=None)
@given(st.floats(width=32, allow_nan=False))
def test_float32_bijection(value):
    back = decode_float32(encode_float32([value]))
    assert np.float32(back[0]).tobytes() == np.float32(value).tobytes()
