"""Calibration-derived monotone transform + fixed bit-depth quantization.

The transform maps feature values through the empirical CDF of a frozen
calibration sample (piecewise-linear, nominally 257 knots) onto [0,1];
codes are then uniform b-bit integers. Out-of-range values saturate at
the calibration min/max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import FeatureTensor
from .packing import Packed2D

KNOTS = 257
MIN_BIT_DEPTH = 2
MAX_BIT_DEPTH = 16


class CalibrationError(Exception):
    pass


class QuantizerError(Exception):
    pass


@dataclass(frozen=True)
class CalibrationStats:
    """Pooled order statistics of one role class's calibration sample."""

    role_class: str
    sample_count: int
    quantiles: np.ndarray  # KNOTS non-decreasing values
    vmin: float
    vmax: float


@dataclass(frozen=True)
class MonotoneTransform:
    """Piecewise-linear monotone map from value space onto [0,1].

    Knot outputs are always the uniform grid over the knot count, so the
    transform is fully determined by its breakpoints (which is what gets
    serialized). Duplicate calibration quantiles are collapsed before
    construction, hence possibly fewer than 257 knots.
    """

    breakpoints: np.ndarray

    def __post_init__(self) -> None:
        bp = np.asarray(self.breakpoints, dtype=np.float32)
        object.__setattr__(self, "breakpoints", bp)
        if bp.ndim != 1 or bp.size < 2:
            raise QuantizerError("transform needs at least 2 breakpoints")
        if not np.isfinite(bp).all():
            raise QuantizerError("non-finite breakpoint")
        if not (np.diff(bp) > 0).all():
            raise QuantizerError("breakpoints must be strictly increasing")

    @property
    def outputs(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.breakpoints.size)

    def to_unit(self, values: np.ndarray) -> np.ndarray:
        """Clamp to the calibrated range and map onto [0,1]."""
        v = np.asarray(values, dtype=np.float64)
        bp = self.breakpoints.astype(np.float64)
        return np.interp(np.clip(v, bp[0], bp[-1]), bp, self.outputs)

    def from_unit(self, t: np.ndarray) -> np.ndarray:
        bp = self.breakpoints.astype(np.float64)
        return np.interp(np.asarray(t, dtype=np.float64), self.outputs, bp)


def linear_transform(lo: float, hi: float, knots: int = KNOTS) -> MonotoneTransform:
    """Identity (affine) transform over [lo, hi]."""
    if not lo < hi:
        raise QuantizerError(f"need lo < hi, got [{lo}, {hi}]")
    return MonotoneTransform(np.linspace(lo, hi, knots, dtype=np.float32))


@dataclass
class QuantizedPlane:
    """Integer codes for one packed plane, tied to the transform that made them."""

    codes: np.ndarray  # uint16, shape (rows, cols)
    bit_depth: int
    transform: MonotoneTransform

    def __post_init__(self) -> None:
        if not MIN_BIT_DEPTH <= self.bit_depth <= MAX_BIT_DEPTH:
            raise QuantizerError(f"bit depth {self.bit_depth} outside [2, 16]")
        self.codes = np.asarray(self.codes, dtype=np.uint16)
        if self.codes.ndim != 2:
            raise QuantizerError("codes must be 2D")
        if self.codes.max(initial=0) > self.max_code:
            raise QuantizerError(f"code exceeds {self.max_code} at bit depth {self.bit_depth}")

    @property
    def rows(self) -> int:
        return self.codes.shape[0]

    @property
    def cols(self) -> int:
        return self.codes.shape[1]

    @property
    def max_code(self) -> int:
        return (1 << self.bit_depth) - 1


def calibration_stats(calib_tensors: list[FeatureTensor], role_class: str) -> CalibrationStats:
    if not calib_tensors:
        raise CalibrationError(f"role {role_class!r}: no calibration tensors")
    pooled = np.concatenate([t.values for t in calib_tensors]).astype(np.float64)
    if pooled.size < KNOTS:
        raise CalibrationError(
            f"role {role_class!r}: {pooled.size} calibration values, need >= {KNOTS}"
        )
    qs = np.quantile(pooled, np.linspace(0.0, 1.0, KNOTS), method="linear")
    return CalibrationStats(
        role_class=role_class,
        sample_count=len(calib_tensors),
        quantiles=qs,
        vmin=float(pooled.min()),
        vmax=float(pooled.max()),
    )


def calibrate(calib_tensors: list[FeatureTensor], role_class: str) -> MonotoneTransform:
    """Fit the frozen transform from a calibration sample.

    Breakpoints are the pooled empirical quantiles at 257 evenly spaced
    probability levels, rounded to float32 (the serialized precision)
    and de-duplicated. All-constant data has no usable spread and is an
    error rather than a silent identity.
    """
    stats = calibration_stats(calib_tensors, role_class)
    bp = np.unique(stats.quantiles.astype(np.float32))
    if bp.size < 2:
        raise CalibrationError(f"role {role_class!r}: degenerate (constant) calibration data")
    return MonotoneTransform(bp)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    # x is nonnegative here (unit interval scaled by the max code)
    return np.floor(x + 0.5)


def forward(plane: Packed2D, transform: MonotoneTransform, bit_depth: int = 8) -> QuantizedPlane:
    if not MIN_BIT_DEPTH <= bit_depth <= MAX_BIT_DEPTH:
        raise QuantizerError(f"bit depth {bit_depth} outside [2, 16]")
    t = transform.to_unit(plane.values)
    max_code = (1 << bit_depth) - 1
    codes = _round_half_away(t * max_code).astype(np.uint16)
    return QuantizedPlane(codes=codes, bit_depth=bit_depth, transform=transform)


def inverse(q: QuantizedPlane) -> Packed2D:
    t = q.codes.astype(np.float64) / q.max_code
    return Packed2D(q.transform.from_unit(t))
