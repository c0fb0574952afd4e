"""Redundancy analysis of packed feature planes.

Covers axis-wise adjacent-element Pearson correlations (averaged per row
and per column, skipping zero-variance slices), DCT-domain energy
statistics (Gini sparsity and normalized radial centroid), and
histogram/CDF summaries. Undefined statistics are reported as None, never
silently as zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dctn

from .container import FeatureTensor
from .packing import Packed2D


class RedundancyError(Exception):
    pass


@dataclass(frozen=True)
class RedundancyReport:
    rho_h: float | None
    rho_v: float | None
    valid_rows: int
    valid_cols: int


@dataclass(frozen=True)
class SpectralReport:
    g_dct: float | None
    c_dct: float | None
    total_energy: float


@dataclass(frozen=True)
class HistogramReport:
    bin_edges: np.ndarray
    counts: np.ndarray
    cdf: np.ndarray


def _lag1_rows(values: np.ndarray) -> tuple[float | None, int]:
    """Mean Pearson between adjacent columns within each row."""
    if values.shape[1] < 2:
        return None, 0
    x = values[:, :-1].astype(np.float64)
    y = values[:, 1:].astype(np.float64)
    xd = x - x.mean(axis=1, keepdims=True)
    yd = y - y.mean(axis=1, keepdims=True)
    sx = (xd * xd).sum(axis=1)
    sy = (yd * yd).sum(axis=1)
    valid = (sx > 0.0) & (sy > 0.0)
    if not valid.any():
        return None, 0
    rho = ((xd * yd).sum(axis=1)[valid]) / np.sqrt(sx[valid] * sy[valid])
    return float(rho.mean()), int(valid.sum())


def rho_axes(plane: Packed2D) -> RedundancyReport:
    """Averaged per-row (rho_h) and per-column (rho_v) lag-1 correlations.

    A slice is valid when both of its shifted halves have nonzero
    variance; an axis with no valid slices (including axes shorter than
    two) gets a None marker with a zero valid count.
    """
    rho_h, valid_rows = _lag1_rows(plane.values)
    rho_v, valid_cols = _lag1_rows(plane.values.T)
    return RedundancyReport(rho_h=rho_h, rho_v=rho_v, valid_rows=valid_rows, valid_cols=valid_cols)


def dct2(plane: Packed2D) -> np.ndarray:
    """Separable orthonormal type-II DCT of the plane (energy preserving)."""
    return dctn(plane.values.astype(np.float64), type=2, norm="ortho")


def gini(energies: np.ndarray) -> float | None:
    """Gini coefficient of a nonnegative energy vector (sorted closed form)."""
    e = np.asarray(energies, dtype=np.float64).reshape(-1)
    if (e < 0).any():
        raise RedundancyError("negative energy")
    total = e.sum()
    if total == 0.0:
        return None
    e = np.sort(e)
    n = e.size
    k = np.arange(1, n + 1, dtype=np.float64)
    return float(((2.0 * k - n - 1.0) * e).sum() / (n * total))


def centroid(coeffs: np.ndarray) -> float | None:
    """Energy-weighted normalized radial frequency of a DCT coefficient plane."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim != 2:
        raise RedundancyError("coefficient plane must be 2D")
    h, w = c.shape
    e = np.abs(c) ** 2
    total = e.sum()
    if total == 0.0:
        return None
    if h == 1 and w == 1:
        return 0.0  # single DC bin
    u = np.arange(h, dtype=np.float64)[:, None]
    v = np.arange(w, dtype=np.float64)[None, :]
    f = np.sqrt(u * u + v * v) / np.sqrt(float(h - 1) ** 2 + float(w - 1) ** 2)
    return float((f * e).sum() / total)


def spectral_report(plane: Packed2D) -> SpectralReport:
    coeffs = dct2(plane)
    e = np.abs(coeffs) ** 2
    total = float(e.sum())
    return SpectralReport(g_dct=gini(e), c_dct=centroid(coeffs), total_energy=total)


def histogram_cdf(tensor: FeatureTensor, bins: int) -> HistogramReport:
    """Equal-width histogram over [min, max] plus the running CDF.

    The maximum lands in the last bin; a constant tensor (zero-width
    range) puts everything into the first bin.
    """
    if bins < 1:
        raise RedundancyError(f"bins must be >= 1, got {bins}")
    v = tensor.values.astype(np.float64)
    if v.size == 0:
        raise RedundancyError("empty tensor")
    lo = float(v.min())
    hi = float(v.max())
    edges = np.linspace(lo, hi, bins + 1)
    if hi > lo:
        idx = np.minimum(((v - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    else:
        idx = np.zeros(v.size, dtype=np.int64)
    counts = np.bincount(idx, minlength=bins)
    cdf = np.cumsum(counts) / v.size
    return HistogramReport(bin_edges=edges, counts=counts, cdf=cdf)


@dataclass(frozen=True)
class TensorAnalysis:
    tensor_id: str
    redundancy: RedundancyReport
    spectral: SpectralReport
    histogram: HistogramReport


def analyze_plane(tensor_id: str, plane: Packed2D, tensor: FeatureTensor, bins: int = 256) -> TensorAnalysis:
    return TensorAnalysis(
        tensor_id=tensor_id,
        redundancy=rho_axes(plane),
        spectral=spectral_report(plane),
        histogram=histogram_cdf(tensor, bins),
    )


def analysis_to_dict(a: TensorAnalysis) -> dict:
    return {
        "tensor_id": a.tensor_id,
        "rho_h": a.redundancy.rho_h,
        "rho_v": a.redundancy.rho_v,
        "valid_rows": a.redundancy.valid_rows,
        "valid_cols": a.redundancy.valid_cols,
        "g_dct": a.spectral.g_dct,
        "c_dct": a.spectral.c_dct,
        "histogram": {
            "edges": a.histogram.bin_edges.tolist(),
            "counts": a.histogram.counts.tolist(),
            "cdf": a.histogram.cdf.tolist(),
        },
    }


def analyses_to_json(analyses: list[TensorAnalysis], path: str | Path | None = None) -> str:
    text = json.dumps([analysis_to_dict(a) for a in analyses], indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def analyses_to_csv(analyses: list[TensorAnalysis], path: str | Path | None = None) -> str:
    """Summary CSV, one row per tensor: Layer,rho_h,rho_v,G_DCT,C_DCT."""
    lines = ["Layer,rho_h,rho_v,G_DCT,C_DCT"]
    fmt = lambda x: "" if x is None else repr(x)
    for a in analyses:
        lines.append(
            f"{a.tensor_id},{fmt(a.redundancy.rho_h)},{fmt(a.redundancy.rho_v)},"
            f"{fmt(a.spectral.g_dct)},{fmt(a.spectral.c_dct)}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
