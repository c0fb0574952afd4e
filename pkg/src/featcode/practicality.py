"""Codec timing/size/memory instrumentation and the break-even bandwidth.

A codec only pays off below the bandwidth at which encode + transmit +
decode matches sending the raw features: B_max = (S_raw - S_enc) /
(T_enc + T_dec). Timing aggregates the median over repeated runs after
warmups; memory goes through a pluggable hook because there is no
portable peak-usage probe.
"""

from __future__ import annotations

import statistics
import time
import tracemalloc
from dataclasses import dataclass

from . import codecs
from .packing import Packed2D, PackingRecord
from .quantizer import MonotoneTransform, QuantizedPlane, forward, inverse

MBPS = 1_000_000  # decimal megabit, networking convention


class PracticalityError(Exception):
    pass


@dataclass(frozen=True)
class TimingRecord:
    t_enc: float
    t_dec: float
    repetitions: int
    warmups: int
    aggregation: str = "median"

    def __post_init__(self) -> None:
        if self.t_enc < 0 or self.t_dec < 0:
            raise PracticalityError("negative time")
        if self.repetitions < 1:
            raise PracticalityError("repetitions must be >= 1")


@dataclass(frozen=True)
class SizeRecord:
    s_raw_bits: int
    s_enc_bits: int

    def __post_init__(self) -> None:
        if self.s_raw_bits < 0 or self.s_enc_bits < 0:
            raise PracticalityError("negative size")


@dataclass(frozen=True)
class BmaxReport:
    bmax_bps: float
    timing: TimingRecord
    size: SizeRecord

    @property
    def bmax_mbps(self) -> float:
        return self.bmax_bps / MBPS


@dataclass(frozen=True)
class MemoryReport:
    peak_bytes: int
    method: str  # "allocator-hook" | "os-sample" | "unavailable"


class TracemallocHook:
    """Peak Python-allocator usage over the measured window."""

    method = "allocator-hook"

    def start(self) -> None:
        tracemalloc.start()

    def stop(self) -> int:
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
        return int(peak)


def b_max(timing: TimingRecord, size: SizeRecord) -> BmaxReport:
    """Maximum bandwidth at which coding still beats raw transmission."""
    total = timing.t_enc + timing.t_dec
    if total <= 0:
        raise PracticalityError("zero total codec time")
    saved = size.s_raw_bits - size.s_enc_bits
    return BmaxReport(bmax_bps=max(saved, 0) / total, timing=timing, size=size)


def _timed(fn) -> tuple[float, object]:
    t0 = time.perf_counter()
    out = fn()
    return time.perf_counter() - t0, out


def measure_codec(
    codec_id: str,
    q: QuantizedPlane,
    quality: codecs.QualityLevel,
    record: PackingRecord | None = None,
    reps: int = 10,
    warmups: int = 2,
    p_raw: int = 32,
    memory_hook=None,
) -> tuple[TimingRecord, SizeRecord, MemoryReport]:
    """Median per-phase wall-clock times plus actual bitstream sizes.

    Codec-only by default: the quantize/pack stages are excluded (see
    measure_end_to_end). Memory is sampled over one extra round trip via
    the hook, or reported unavailable.
    """
    if reps < 1:
        raise PracticalityError("reps must be >= 1")
    if record is None:
        record = PackingRecord(
            tensor_id="bench",
            original_shape=(q.rows, q.cols),
            layout_rule="last-axis-as-columns",
        )
    for _ in range(warmups):
        codecs.decode(codecs.encode(q, codec_id, quality, record))
    enc_times, dec_times = [], []
    bs = None
    for _ in range(reps):
        dt, bs = _timed(lambda: codecs.encode(q, codec_id, quality, record))
        enc_times.append(dt)
        dt, _ = _timed(lambda: codecs.decode(bs))
        dec_times.append(dt)
    timing = TimingRecord(
        t_enc=statistics.median(enc_times),
        t_dec=statistics.median(dec_times),
        repetitions=reps,
        warmups=warmups,
    )
    size = SizeRecord(s_raw_bits=q.rows * q.cols * p_raw, s_enc_bits=bs.n_bits)
    if memory_hook is None:
        memory = MemoryReport(peak_bytes=0, method="unavailable")
    else:
        memory_hook.start()
        codecs.decode(codecs.encode(q, codec_id, quality, record))
        memory = MemoryReport(peak_bytes=memory_hook.stop(), method=memory_hook.method)
    return timing, size, memory


def measure_end_to_end(
    plane: Packed2D,
    transform: MonotoneTransform,
    bit_depth: int,
    codec_id: str,
    quality: codecs.QualityLevel,
    record: PackingRecord | None = None,
    reps: int = 10,
    warmups: int = 2,
    p_raw: int = 32,
) -> tuple[TimingRecord, SizeRecord]:
    """Like measure_codec but folds quantization into T_enc and
    de-quantization into T_dec."""
    if reps < 1:
        raise PracticalityError("reps must be >= 1")
    if record is None:
        record = PackingRecord(
            tensor_id="bench",
            original_shape=(plane.rows, plane.cols),
            layout_rule="last-axis-as-columns",
        )

    def enc():
        return codecs.encode(forward(plane, transform, bit_depth), codec_id, quality, record)

    def dec(bs):
        q2, _ = codecs.decode(bs)
        return inverse(q2)

    for _ in range(warmups):
        dec(enc())
    enc_times, dec_times = [], []
    bs = None
    for _ in range(reps):
        dt, bs = _timed(enc)
        enc_times.append(dt)
        dt, _ = _timed(lambda: dec(bs))
        dec_times.append(dt)
    timing = TimingRecord(
        t_enc=statistics.median(enc_times),
        t_dec=statistics.median(dec_times),
        repetitions=reps,
        warmups=warmups,
    )
    size = SizeRecord(s_raw_bits=plane.rows * plane.cols * p_raw, s_enc_bits=bs.n_bits)
    return timing, size
