"""Writer for the featcode container wire format.

Deliberately self-contained: this package talks to the analysis framework
only through its published file formats. A container is
``<stem>.manifest.json`` + ``<stem>.blob``; the blob holds row-major
little-endian element bytes at each tensor's declared precision, and the
manifest indexes them by byte offset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
PRECISION_BITS = {"fp32": 32, "fp16": 16, "bf16": 16}


class ContainerWriteError(Exception):
    pass


@dataclass
class TensorRecord:
    id: str
    precision: str  # fp32 | fp16 | bf16
    shape: tuple[int, ...]
    values: np.ndarray  # float32, flat row-major
    role: str = ""
    source: str = ""


def _f32_to_bf16_bits(values: np.ndarray) -> np.ndarray:
    u = np.ascontiguousarray(values, dtype="<f4").view("<u4")
    bias = np.uint32(0x7FFF) + ((u >> np.uint32(16)) & np.uint32(1))
    return ((u + bias) >> np.uint32(16)).astype("<u2")


def _element_bytes(rec: TensorRecord) -> bytes:
    v = np.ascontiguousarray(rec.values, dtype=np.float32).reshape(-1)
    if rec.precision == "fp32":
        return v.astype("<f4").tobytes()
    if rec.precision == "fp16":
        return v.astype("<f2").tobytes()
    if rec.precision == "bf16":
        return _f32_to_bf16_bits(v).tobytes()
    raise ContainerWriteError(f"unknown precision {rec.precision!r}")


def write_container(records: list[TensorRecord], stem: str | Path) -> Path:
    """Write one container; returns the manifest path."""
    stem = Path(stem)
    seen = set()
    entries = []
    chunks = []
    offset = 0
    for rec in records:
        if rec.id in seen:
            raise ContainerWriteError(f"duplicate tensor id {rec.id!r}")
        seen.add(rec.id)
        count = math.prod(rec.shape)
        if rec.values.size != count:
            raise ContainerWriteError(f"{rec.id!r}: {rec.values.size} values for shape {rec.shape}")
        if not np.isfinite(rec.values).all():
            raise ContainerWriteError(f"{rec.id!r}: non-finite values")
        raw = _element_bytes(rec)
        entries.append(
            {
                "id": rec.id,
                "precision": rec.precision,
                "shape": list(rec.shape),
                "offset": offset,
                "length": len(raw),
                "role": rec.role,
                "source": rec.source,
            }
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "set_name": stem.name,
        "tensors": entries,
    }
    blob_path = stem.with_name(stem.name + ".blob")
    manifest_path = stem.with_name(stem.name + ".manifest.json")
    blob_path.write_bytes(b"".join(chunks))
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path
