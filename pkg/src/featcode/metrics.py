"""Precision-aware bitrate metrics, distortion, and rate-performance tables.

BPFP is payload bits per feature element; EBPFP rescales it by 32/P_raw so
codecs on 16-bit sources compete on the same scale as 32-bit ones. An
uncompressed tensor therefore always scores EBPFP 32, whatever its source
precision.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import FeatureTensor

SUPPORTED_RAW_BITS = (16, 32)


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class RateRecord:
    n_bits: int
    element_count: int
    p_raw: int
    header_bits: int = 0

    def __post_init__(self) -> None:
        if self.element_count <= 0:
            raise MetricsError("element_count must be positive")
        if self.n_bits < 0 or self.header_bits < 0:
            raise MetricsError("bit counts must be nonnegative")


@dataclass(frozen=True)
class DistortionRecord:
    mse: float


@dataclass(frozen=True)
class PerformanceRecord:
    metric_name: str
    value: float
    direction: str  # "higher-better" | "lower-better"

    def __post_init__(self) -> None:
        if self.direction not in ("higher-better", "lower-better"):
            raise MetricsError(f"bad direction {self.direction!r}")


@dataclass(frozen=True)
class CorrelationReport:
    rho: float | None  # None marks an undefined correlation
    n_points: int


@dataclass(frozen=True)
class RatePerformancePoint:
    lam: float
    ebpfp: float
    bpfp: float
    mse: float
    performance: PerformanceRecord | None
    bmax_mbps: float | None
    header_bits: int


def bpfp(r: RateRecord) -> float:
    return r.n_bits / r.element_count


def ebpfp(r: RateRecord) -> float:
    if r.p_raw not in SUPPORTED_RAW_BITS:
        raise MetricsError(f"unsupported raw precision {r.p_raw} bits")
    return (32.0 / r.p_raw) * bpfp(r)


def mse(original: FeatureTensor, reconstructed: FeatureTensor) -> DistortionRecord:
    if original.shape != reconstructed.shape:
        raise MetricsError(
            f"shape mismatch: {original.shape} vs {reconstructed.shape}"
        )
    a = original.values.astype(np.float64)
    b = reconstructed.values.astype(np.float64)
    return DistortionRecord(mse=float(np.mean((a - b) ** 2)))


def pearson(xs, ys) -> CorrelationReport:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricsError(f"series length mismatch: {x.shape} vs {y.shape}")
    n = x.size
    if n < 2:
        return CorrelationReport(rho=None, n_points=n)
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt((xd * xd).sum()))
    sy = float(np.sqrt((yd * yd).sum()))
    if sx == 0.0 or sy == 0.0:
        return CorrelationReport(rho=None, n_points=n)
    return CorrelationReport(rho=float((xd * yd).sum() / (sx * sy)), n_points=n)


def build_rp_table(
    runs: list[tuple[float, RateRecord, DistortionRecord, PerformanceRecord | None, "object | None"]],
) -> tuple[list[RatePerformancePoint], CorrelationReport]:
    """Assemble one rate-performance table, sorted by quality level.

    Each run is (lambda, rate, distortion, performance, bmax_report); the
    last two may be None. The correlation relates the MSE column to the
    raw performance values across the table's rows.
    """
    if not runs:
        raise MetricsError("no runs")
    lams = [r[0] for r in runs]
    if len(set(lams)) != len(lams):
        raise MetricsError(f"duplicate lambda entries in {sorted(lams)}")
    points = []
    for lam, rate, dist, perf, bmax in sorted(runs, key=lambda r: r[0]):
        points.append(
            RatePerformancePoint(
                lam=lam,
                ebpfp=ebpfp(rate),
                bpfp=bpfp(rate),
                mse=dist.mse,
                performance=perf,
                bmax_mbps=None if bmax is None else bmax.bmax_mbps,
                header_bits=rate.header_bits,
            )
        )
    with_perf = [p for p in points if p.performance is not None]
    corr = pearson(
        [p.mse for p in with_perf],
        [p.performance.value for p in with_perf],
    ) if len(with_perf) >= 2 else CorrelationReport(rho=None, n_points=len(with_perf))
    return points, corr


RP_CSV_COLUMNS = (
    "lambda",
    "ebpfp",
    "bpfp",
    "mse",
    "perf_name",
    "perf_value",
    "bmax_mbps",
    "header_bits",
)


def rp_table_to_csv(points: list[RatePerformancePoint], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RP_CSV_COLUMNS)
    for p in points:
        writer.writerow(
            [
                repr(p.lam),
                repr(p.ebpfp),
                repr(p.bpfp),
                repr(p.mse),
                p.performance.metric_name if p.performance else "",
                repr(p.performance.value) if p.performance else "",
                repr(p.bmax_mbps) if p.bmax_mbps is not None else "",
                p.header_bits,
            ]
        )
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
