import numpy as np
import pytest

from featcode import rangecoder as rc


def _round_trip(symbols, alphabet):
    data = rc.encode_order0(symbols, alphabet)
    back = rc.decode_order0(data, symbols.size, alphabet)
    assert np.array_equal(symbols, back)
    return data


@pytest.mark.parametrize("alphabet", [2, 4, 256, 4096])
def test_order0_round_trip_random(alphabet):
    rng = np.random.default_rng(alphabet)
    for n in (1, 2, 100, 10_000):
        _round_trip(rng.integers(0, alphabet, n).astype(np.uint16), alphabet)


def test_order0_round_trip_adversarial():
    rng = np.random.default_rng(9)
    for trial in range(20):
        a = int(rng.integers(2, 4097))
        n = int(rng.integers(1, 20_000))
        kind = trial % 3
        if kind == 0:
            syms = np.full(n, rng.integers(0, a))
        elif kind == 1:
            p = rng.dirichlet(np.ones(a) * 0.02)
            syms = rng.choice(a, size=n, p=p)
        else:
            syms = np.arange(n) % a
        _round_trip(syms.astype(np.uint16), a)


def test_constant_input_compresses_hard():
    data = _round_trip(np.zeros(10_000, dtype=np.uint16), 256)
    assert len(data) <= 32


def test_rate_near_entropy_uniform():
    rng = np.random.default_rng(0)
    n = 100_000
    data = _round_trip(rng.integers(0, 256, n).astype(np.uint16), 256)
    assert 8 * len(data) <= 1.05 * 8.0 * n + 64 * 8


def test_rate_near_entropy_skewed():
    rng = np.random.default_rng(1)
    n = 100_000
    syms = (rng.random(n) < 0.1).astype(np.uint16)
    data = _round_trip(syms, 2)
    h = -(0.1 * np.log2(0.1) + 0.9 * np.log2(0.9))
    assert 0.95 * h * n <= 8 * len(data) <= 1.05 * h * n + 64 * 8


@pytest.mark.parametrize("bits", [2, 8, 12])
def test_med_round_trip(bits):
    rng = np.random.default_rng(bits)
    for rows, cols in ((1, 1), (1, 50), (50, 1), (37, 41), (128, 128)):
        plane = rng.integers(0, 1 << bits, (rows, cols)).astype(np.uint16)
        data = rc.encode_med(plane, bits)
        assert np.array_equal(rc.decode_med(data, rows, cols, bits), plane)


def test_med_smooth_beats_order0():
    # a smooth gradient is where the predictor should win decisively
    i, j = np.meshgrid(np.arange(64), np.arange(64), indexing="ij")
    plane = ((i + j) * 2 % 256).astype(np.uint16)
    med = rc.encode_med(plane, 8)
    o0 = rc.encode_order0(plane.reshape(-1), 256)
    assert len(med) < len(o0)


def test_alphabet_limits():
    with pytest.raises(ValueError):
        rc.encode_order0(np.zeros(4, np.uint16), 1 << 13)
    with pytest.raises(ValueError):
        rc.encode_order0(np.array([5], np.uint16), 4)
    with pytest.raises(ValueError):
        rc.encode_med(np.zeros((2, 2), np.uint16), 13)
