"""Adaptive order-0 range coding kernels.

Byte-wise renormalizing coder with 32-bit low/range state (carry staged
through a cache byte) and an adaptive frequency model: Fenwick cumulative
counts, per-symbol increment 32, halving rescale when the total reaches
2**16. All constants are fixed, so streams are bit-exact across platforms.
Inner loops are JIT-compiled; the first call in a process pays the
compilation cost once.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INCREMENT = 32
RESCALE_TOTAL = 1 << 16
MAX_MODEL_BITS = 12  # alphabet cap: initial total must sit well under the rescale threshold

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


@njit(cache=True)
def _fen_rebuild(tree, freq):
    a = freq.size
    for i in range(a + 1):
        tree[i] = 0
    for i in range(1, a + 1):
        tree[i] += freq[i - 1]
        j = i + (i & (-i))
        if j <= a:
            tree[j] += tree[i]


@njit(cache=True)
def _fen_add(tree, sym, delta):
    j = sym + 1
    n = tree.size
    while j < n:
        tree[j] += delta
        j += j & (-j)


@njit(cache=True)
def _fen_prefix(tree, sym):
    s = 0
    j = sym
    while j > 0:
        s += tree[j]
        j -= j & (-j)
    return s


@njit(cache=True)
def _fen_find(tree, alphabet, top_bit, target):
    """Largest sym with prefix(sym) <= target; returns (sym, prefix(sym))."""
    pos = 0
    rem = target
    bit = top_bit
    while bit > 0:
        npos = pos + bit
        if npos <= alphabet and tree[npos] <= rem:
            pos = npos
            rem -= tree[npos]
        bit >>= 1
    return pos, target - rem


@njit(cache=True)
def _model_update(freq, tree, sym, tot):
    freq[sym] += INCREMENT
    _fen_add(tree, sym, INCREMENT)
    tot += INCREMENT
    if tot >= RESCALE_TOTAL:
        tot = 0
        for i in range(freq.size):
            freq[i] = (freq[i] + 1) >> 1
            tot += freq[i]
        _fen_rebuild(tree, freq)
    return tot


@njit(cache=True)
def _shift_low(low, cache, cache_size, out, pos):
    if low < 0xFF000000 or low > _MASK32:
        carry = low >> 32
        out[pos] = (cache + carry) & 0xFF
        pos += 1
        while cache_size > 1:
            out[pos] = (0xFF + carry) & 0xFF
            pos += 1
            cache_size -= 1
        cache = (low >> 24) & 0xFF
        cache_size = 0
    cache_size += 1
    low = (low << 8) & _MASK32
    return low, cache, cache_size, pos


@njit(cache=True)
def _encode_order0(symbols, alphabet):
    n = symbols.size
    out = np.empty(3 * n + 64, np.uint8)
    freq = np.ones(alphabet, np.int64)
    tree = np.zeros(alphabet + 1, np.int64)
    _fen_rebuild(tree, freq)
    tot = np.int64(alphabet)

    low = np.int64(0)
    rng = np.int64(_MASK32)
    cache = np.int64(0)
    cache_size = np.int64(1)
    pos = np.int64(0)
    for k in range(n):
        s = np.int64(symbols[k])
        cum = _fen_prefix(tree, s)
        f = freq[s]
        r = rng // tot
        low += r * cum
        rng = r * f
        while rng < _TOP:
            low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
            rng <<= 8
        tot = _model_update(freq, tree, s, tot)
    for _ in range(5):
        low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
    return out[:pos]


@njit(cache=True)
def _decode_order0(buf, n, alphabet):
    syms = np.empty(n, np.uint16)
    freq = np.ones(alphabet, np.int64)
    tree = np.zeros(alphabet + 1, np.int64)
    _fen_rebuild(tree, freq)
    tot = np.int64(alphabet)
    top_bit = np.int64(1)
    while (top_bit << 1) <= alphabet:
        top_bit <<= 1

    m = buf.size
    code = np.int64(0)
    rng = np.int64(_MASK32)
    pos = np.int64(0)
    for _ in range(5):
        b = buf[pos] if pos < m else 0
        code = ((code << 8) | b) & _MASK32
        pos += 1
    for k in range(n):
        r = rng // tot
        t = code // r
        if t >= tot:
            t = tot - 1
        s, cum = _fen_find(tree, alphabet, top_bit, t)
        f = freq[s]
        code -= r * cum
        rng = r * f
        while rng < _TOP:
            b = buf[pos] if pos < m else 0
            code = ((code << 8) | b) & _MASK32
            pos += 1
            rng <<= 8
        syms[k] = s
        tot = _model_update(freq, tree, s, tot)
    return syms


@njit(cache=True)
def _med_predict(codes, i, j, midpoint):
    # median-edge-detector gradient predictor; borders fall back to the
    # available neighbour, origin to the code-range midpoint
    if i == 0 and j == 0:
        return midpoint
    if i == 0:
        return codes[0, j - 1]
    if j == 0:
        return codes[i - 1, 0]
    a = codes[i, j - 1]
    b = codes[i - 1, j]
    c = codes[i - 1, j - 1]
    hi = a if a > b else b
    lo = a if a < b else b
    if c >= hi:
        return lo
    if c <= lo:
        return hi
    return a + b - c


@njit(cache=True)
def _encode_med(codes, bit_depth):
    rows, cols = codes.shape
    n = rows * cols
    out = np.empty(5 * n + 64, np.uint8)
    alphabet = np.int64(1) << bit_depth
    midpoint = alphabet >> 1

    mfreq = np.ones(alphabet, np.int64)
    mtree = np.zeros(alphabet + 1, np.int64)
    _fen_rebuild(mtree, mfreq)
    mtot = np.int64(alphabet)
    s_neg = np.int64(1)
    s_pos = np.int64(1)

    low = np.int64(0)
    rng = np.int64(_MASK32)
    cache = np.int64(0)
    cache_size = np.int64(1)
    pos = np.int64(0)
    for i in range(rows):
        for j in range(cols):
            pred = _med_predict(codes, i, j, midpoint)
            d = np.int64(codes[i, j]) - pred
            mag = d if d >= 0 else -d

            cum = _fen_prefix(mtree, mag)
            f = mfreq[mag]
            r = rng // mtot
            low += r * cum
            rng = r * f
            while rng < _TOP:
                low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
                rng <<= 8
            mtot = _model_update(mfreq, mtree, mag, mtot)

            if mag > 0:
                stot = s_pos + s_neg
                r = rng // stot
                if d < 0:
                    low += r * s_pos
                    rng = r * s_neg
                    s_neg += INCREMENT
                else:
                    rng = r * s_pos
                    s_pos += INCREMENT
                while rng < _TOP:
                    low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
                    rng <<= 8
                if s_pos + s_neg >= RESCALE_TOTAL:
                    s_pos = (s_pos + 1) >> 1
                    s_neg = (s_neg + 1) >> 1
    for _ in range(5):
        low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
    return out[:pos]


@njit(cache=True)
def _decode_med(buf, rows, cols, bit_depth):
    codes = np.zeros((rows, cols), np.int64)
    alphabet = np.int64(1) << bit_depth
    midpoint = alphabet >> 1

    mfreq = np.ones(alphabet, np.int64)
    mtree = np.zeros(alphabet + 1, np.int64)
    _fen_rebuild(mtree, mfreq)
    mtot = np.int64(alphabet)
    top_bit = np.int64(1)
    while (top_bit << 1) <= alphabet:
        top_bit <<= 1
    s_neg = np.int64(1)
    s_pos = np.int64(1)

    m = buf.size
    code = np.int64(0)
    rng = np.int64(_MASK32)
    pos = np.int64(0)
    for _ in range(5):
        b = buf[pos] if pos < m else 0
        code = ((code << 8) | b) & _MASK32
        pos += 1
    for i in range(rows):
        for j in range(cols):
            r = rng // mtot
            t = code // r
            if t >= mtot:
                t = mtot - 1
            mag, cum = _fen_find(mtree, alphabet, top_bit, t)
            f = mfreq[mag]
            code -= r * cum
            rng = r * f
            while rng < _TOP:
                b = buf[pos] if pos < m else 0
                code = ((code << 8) | b) & _MASK32
                pos += 1
                rng <<= 8
            mtot = _model_update(mfreq, mtree, mag, mtot)

            d = np.int64(mag)
            if mag > 0:
                stot = s_pos + s_neg
                r = rng // stot
                t = code // r
                if t >= s_pos:
                    d = -d
                    code -= r * s_pos
                    rng = r * s_neg
                    s_neg += INCREMENT
                else:
                    rng = r * s_pos
                    s_pos += INCREMENT
                while rng < _TOP:
                    b = buf[pos] if pos < m else 0
                    code = ((code << 8) | b) & _MASK32
                    pos += 1
                    rng <<= 8
                if s_pos + s_neg >= RESCALE_TOTAL:
                    s_pos = (s_pos + 1) >> 1
                    s_neg = (s_neg + 1) >> 1
            codes[i, j] = _med_predict(codes, i, j, midpoint) + d
    return codes


def encode_order0(symbols: np.ndarray, alphabet: int) -> bytes:
    """Range-code a symbol sequence with the adaptive order-0 model."""
    if alphabet < 2 or alphabet > (1 << MAX_MODEL_BITS):
        raise ValueError(f"alphabet {alphabet} outside [2, 2**{MAX_MODEL_BITS}]")
    syms = np.ascontiguousarray(symbols, dtype=np.uint16).reshape(-1)
    if syms.size and int(syms.max()) >= alphabet:
        raise ValueError("symbol outside alphabet")
    return _encode_order0(syms, alphabet).tobytes()


def decode_order0(data: bytes, count: int, alphabet: int) -> np.ndarray:
    buf = np.frombuffer(data, dtype=np.uint8)
    return np.asarray(_decode_order0(buf, count, alphabet))


def encode_med(codes: np.ndarray, bit_depth: int) -> bytes:
    """MED-predicted residual coding of a 2D code plane (sign + magnitude)."""
    if bit_depth < 2 or bit_depth > MAX_MODEL_BITS:
        raise ValueError(f"bit depth {bit_depth} outside [2, {MAX_MODEL_BITS}]")
    plane = np.ascontiguousarray(codes, dtype=np.int64)
    return _encode_med(plane, bit_depth).tobytes()


def decode_med(data: bytes, rows: int, cols: int, bit_depth: int) -> np.ndarray:
    buf = np.frombuffer(data, dtype=np.uint8)
    out = _decode_med(buf, rows, cols, bit_depth)
    return np.asarray(out).astype(np.uint16)


def warm_kernels() -> None:
    """Trigger JIT compilation of every kernel on tiny inputs."""
    s = np.array([0, 1, 2, 1], dtype=np.uint16)
    decode_order0(encode_order0(s, 4), s.size, 4)
    plane = np.array([[0, 1], [2, 3]], dtype=np.uint16)
    decode_med(encode_med(plane, 2), 2, 2, 2)
