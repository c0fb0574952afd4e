"""Reshaping arbitrary-rank feature tensors into the 2D planes codecs consume.

Rank>=2 tensors fold every leading axis into rows and keep the last axis
as columns (sequence-vs-channel orientation); rank-1 tensors become a
single row. Both directions are pure reshapes: element order never
changes, so the inverse is bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .container import FeatureTensor, Precision

LAYOUT_LAST_AXIS = "last-axis-as-columns"
LAYOUT_ROW_VECTOR = "row-vector"


class PackingError(Exception):
    pass


@dataclass
class Packed2D:
    """A row-major 2D plane of real values."""

    values: np.ndarray  # shape (rows, cols)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise PackingError(f"plane must be 2D, got ndim={self.values.ndim}")
        if self.values.size == 0:
            raise PackingError("empty plane")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PackingRecord:
    """Metadata needed to invert pack() exactly.

    precision/role/source ride along so the original tensor can be rebuilt
    in full; the bitstream header serializes only (shape, layout_rule).
    """

    tensor_id: str
    original_shape: tuple[int, ...]
    layout_rule: str
    precision: Precision = Precision.FP32
    role: str = ""
    source: str = ""


def pack(tensor: FeatureTensor) -> tuple[Packed2D, PackingRecord]:
    shape = tensor.shape
    if len(shape) == 1:
        rows, cols = 1, shape[0]
        rule = LAYOUT_ROW_VECTOR
    else:
        rows, cols = math.prod(shape[:-1]), shape[-1]
        rule = LAYOUT_LAST_AXIS
    plane = Packed2D(tensor.values.reshape(rows, cols))
    record = PackingRecord(
        tensor_id=tensor.id,
        original_shape=shape,
        layout_rule=rule,
        precision=tensor.precision,
        role=tensor.role,
        source=tensor.source,
    )
    return plane, record


def packed_dims(shape: tuple[int, ...], layout_rule: str) -> tuple[int, int]:
    """Plane dimensions implied by an original shape and layout rule."""
    if layout_rule == LAYOUT_ROW_VECTOR:
        if len(shape) != 1:
            raise PackingError(f"row-vector rule needs rank-1 shape, got {shape}")
        return 1, shape[0]
    if layout_rule == LAYOUT_LAST_AXIS:
        if len(shape) < 2:
            raise PackingError(f"last-axis rule needs rank>=2 shape, got {shape}")
        return math.prod(shape[:-1]), shape[-1]
    raise PackingError(f"unknown layout rule {layout_rule!r}")


def unpack(plane: Packed2D, record: PackingRecord) -> FeatureTensor:
    expected = packed_dims(record.original_shape, record.layout_rule)
    if (plane.rows, plane.cols) != expected:
        raise PackingError(
            f"plane {plane.rows}x{plane.cols} does not match shape "
            f"{record.original_shape} under rule {record.layout_rule!r}"
        )
    return FeatureTensor(
        id=record.tensor_id,
        precision=record.precision,
        shape=record.original_shape,
        values=plane.values.reshape(-1),
        role=record.role,
        source=record.source,
    )
