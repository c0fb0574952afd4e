"""Pluggable encode/decode stage operating on quantized planes.

Four reference codecs ship with the registry:

- ``passthrough``: codes bit-packed contiguously, no modelling.
- ``entropy0``: adaptive order-0 range coding of the codes.
- ``predictive``: median-edge-detector residuals, range-coded with
  sign-magnitude contexts.
- ``lossy_requant``: codes re-quantized to a lambda-dependent smaller
  bit depth, then entropy coded; decode rescales back.

entropy0 and predictive payloads start with a one-byte mode flag and fall
back to raw bit-packing whenever the coded form is not smaller, so no
input can cost more than passthrough plus the flag byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rangecoder
from .packing import (
    LAYOUT_LAST_AXIS,
    LAYOUT_ROW_VECTOR,
    PackingRecord,
    packed_dims,
)
from .quantizer import MonotoneTransform, QuantizedPlane

MAGIC = b"LMFC"
BITSTREAM_VERSION = 1

LAMBDA_GRID = (0.001, 0.004, 0.007, 0.01, 0.02)

# rate ladder for the lossy reference codec: lambda -> re-quantization bit depth
LAMBDA_TO_BITS = {0.001: 2, 0.004: 3, 0.007: 4, 0.01: 5, 0.02: 6}

_RAW_MODE = 0
_CODED_MODE = 1

_LAYOUT_WIRE = {LAYOUT_LAST_AXIS: 0, LAYOUT_ROW_VECTOR: 1}
_LAYOUT_FROM_WIRE = {v: k for k, v in _LAYOUT_WIRE.items()}


class CodecError(Exception):
    pass


class UnknownCodecError(CodecError):
    pass


class DuplicateCodecError(CodecError):
    pass


class UnsupportedBitDepthError(CodecError):
    pass


class QualityError(CodecError):
    pass


class BitstreamFormatError(CodecError):
    pass


class BadMagicError(BitstreamFormatError):
    pass


class BitstreamVersionError(BitstreamFormatError):
    pass


class TruncatedPayloadError(BitstreamFormatError):
    pass


def grid_lambda(lam: float) -> float | None:
    """Snap to the standard quality grid (tolerates float32 round trips)."""
    for g in LAMBDA_GRID:
        if abs(lam - g) <= 1e-6 * max(g, 1.0):
            return g
    return None


@dataclass(frozen=True)
class QualityLevel:
    """Rate-controlling quality parameter, normally restricted to the grid."""

    lam: float
    allow_off_grid: bool = False

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise QualityError(f"lambda must be positive, got {self.lam}")
        g = grid_lambda(self.lam)
        if g is None and not self.allow_off_grid:
            raise QualityError(f"lambda {self.lam} not in grid {LAMBDA_GRID}")
        if g is not None:
            object.__setattr__(self, "lam", g)


@dataclass(frozen=True)
class CodecDescriptor:
    codec_id: str
    lossless: bool
    bit_depths: tuple[int, int]  # inclusive (min, max)


@dataclass
class Bitstream:
    """Header + payload container for one encoded tensor plane."""

    codec_id: str
    lam: float
    bit_depth: int
    record: PackingRecord
    breakpoints: np.ndarray  # transform knots, float32
    payload: bytes
    version: int = BITSTREAM_VERSION

    @property
    def n_bits(self) -> int:
        return 8 * len(self.payload)

    @property
    def header_bits(self) -> int:
        return 8 * len(serialize_header(self))


def _pack_codes(codes: np.ndarray, bit_depth: int) -> bytes:
    """Pack b-bit codes contiguously, LSB-first."""
    flat = np.ascontiguousarray(codes, dtype=np.uint16).reshape(-1)
    shifts = np.arange(bit_depth, dtype=np.uint16)
    bits = ((flat[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def _unpack_codes(data: bytes, count: int, bit_depth: int) -> np.ndarray:
    need = (count * bit_depth + 7) // 8
    if len(data) < need:
        raise TruncatedPayloadError(f"need {need} payload bytes, have {len(data)}")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count * bit_depth, bitorder="little")
    shifts = np.arange(bit_depth, dtype=np.uint32)
    vals = (bits.reshape(count, bit_depth).astype(np.uint32) << shifts).sum(axis=1, dtype=np.uint32)
    return vals.astype(np.uint16)


def _with_fallback(coded: bytes, codes: np.ndarray, bit_depth: int) -> bytes:
    raw = _pack_codes(codes, bit_depth)
    if len(coded) < len(raw):
        return bytes([_CODED_MODE]) + coded
    return bytes([_RAW_MODE]) + raw


def _read_mode(payload: bytes) -> tuple[int, bytes]:
    if len(payload) < 1:
        raise TruncatedPayloadError("empty payload")
    mode = payload[0]
    if mode not in (_RAW_MODE, _CODED_MODE):
        raise BitstreamFormatError(f"unknown payload mode {mode}")
    return mode, payload[1:]


class _Passthrough:
    descriptor = CodecDescriptor("passthrough", lossless=True, bit_depths=(2, 16))

    def encode(self, q: QuantizedPlane, quality: QualityLevel) -> bytes:
        return _pack_codes(q.codes, q.bit_depth)

    def decode(self, payload: bytes, rows: int, cols: int, bit_depth: int, quality: QualityLevel) -> np.ndarray:
        return _unpack_codes(payload, rows * cols, bit_depth).reshape(rows, cols)


class _Entropy0:
    descriptor = CodecDescriptor("entropy0", lossless=True, bit_depths=(2, rangecoder.MAX_MODEL_BITS))

    def encode(self, q: QuantizedPlane, quality: QualityLevel) -> bytes:
        coded = rangecoder.encode_order0(q.codes.reshape(-1), 1 << q.bit_depth)
        return _with_fallback(coded, q.codes, q.bit_depth)

    def decode(self, payload: bytes, rows: int, cols: int, bit_depth: int, quality: QualityLevel) -> np.ndarray:
        mode, body = _read_mode(payload)
        if mode == _RAW_MODE:
            return _unpack_codes(body, rows * cols, bit_depth).reshape(rows, cols)
        return rangecoder.decode_order0(body, rows * cols, 1 << bit_depth).reshape(rows, cols)


class _Predictive:
    descriptor = CodecDescriptor("predictive", lossless=True, bit_depths=(2, rangecoder.MAX_MODEL_BITS))

    def encode(self, q: QuantizedPlane, quality: QualityLevel) -> bytes:
        coded = rangecoder.encode_med(q.codes, q.bit_depth)
        return _with_fallback(coded, q.codes, q.bit_depth)

    def decode(self, payload: bytes, rows: int, cols: int, bit_depth: int, quality: QualityLevel) -> np.ndarray:
        mode, body = _read_mode(payload)
        if mode == _RAW_MODE:
            return _unpack_codes(body, rows * cols, bit_depth).reshape(rows, cols)
        return rangecoder.decode_med(body, rows, cols, bit_depth)


def requant_bits(quality: QualityLevel) -> int:
    g = grid_lambda(quality.lam)
    if g is None:
        raise QualityError(
            f"lossy_requant needs a grid lambda {LAMBDA_GRID}, got {quality.lam}"
        )
    return LAMBDA_TO_BITS[g]


class _LossyRequant:
    descriptor = CodecDescriptor("lossy_requant", lossless=False, bit_depths=(2, 16))

    def encode(self, q: QuantizedPlane, quality: QualityLevel) -> bytes:
        b2 = requant_bits(quality)
        hi = (1 << q.bit_depth) - 1
        lo = (1 << b2) - 1
        small = np.floor(q.codes.astype(np.float64) * (lo / hi) + 0.5).astype(np.uint16)
        coded = rangecoder.encode_order0(small.reshape(-1), 1 << b2)
        return _with_fallback(coded, small, b2)

    def decode(self, payload: bytes, rows: int, cols: int, bit_depth: int, quality: QualityLevel) -> np.ndarray:
        b2 = requant_bits(quality)
        mode, body = _read_mode(payload)
        if mode == _RAW_MODE:
            small = _unpack_codes(body, rows * cols, b2).reshape(rows, cols)
        else:
            small = rangecoder.decode_order0(body, rows * cols, 1 << b2).reshape(rows, cols)
        hi = (1 << bit_depth) - 1
        lo = (1 << b2) - 1
        return np.floor(small.astype(np.float64) * (hi / lo) + 0.5).astype(np.uint16)


_registry: dict[str, tuple[CodecDescriptor, object, int]] = {}
_wire_ids: dict[int, str] = {}


def register_codec(descriptor: CodecDescriptor, impl, wire_id: int | None = None) -> None:
    if descriptor.codec_id in _registry:
        raise DuplicateCodecError(f"codec {descriptor.codec_id!r} already registered")
    if wire_id is None:
        wire_id = max(_wire_ids, default=-1) + 1
    if wire_id in _wire_ids:
        raise DuplicateCodecError(f"wire id {wire_id} already taken")
    _registry[descriptor.codec_id] = (descriptor, impl, wire_id)
    _wire_ids[wire_id] = descriptor.codec_id


def registered_codecs() -> list[str]:
    return sorted(_registry, key=lambda cid: _registry[cid][2])


def get_descriptor(codec_id: str) -> CodecDescriptor:
    return _resolve(codec_id)[0]


def _resolve(codec_id: str) -> tuple[CodecDescriptor, object, int]:
    try:
        return _registry[codec_id]
    except KeyError:
        raise UnknownCodecError(f"unknown codec {codec_id!r}") from None


for _i, _impl in enumerate((_Passthrough(), _Entropy0(), _Predictive(), _LossyRequant())):
    register_codec(_impl.descriptor, _impl, wire_id=_i)


def encode(
    q: QuantizedPlane,
    codec_id: str,
    quality: QualityLevel,
    record: PackingRecord,
) -> Bitstream:
    desc, impl, _ = _resolve(codec_id)
    lo, hi = desc.bit_depths
    if not lo <= q.bit_depth <= hi:
        raise UnsupportedBitDepthError(
            f"codec {codec_id!r} supports bit depths [{lo}, {hi}], got {q.bit_depth}"
        )
    if packed_dims(record.original_shape, record.layout_rule) != (q.rows, q.cols):
        raise CodecError("packing record does not match plane dimensions")
    payload = impl.encode(q, quality)
    return Bitstream(
        codec_id=codec_id,
        lam=quality.lam,
        bit_depth=q.bit_depth,
        record=record,
        breakpoints=np.asarray(q.transform.breakpoints, dtype=np.float32),
        payload=payload,
    )


def decode(bs: Bitstream) -> tuple[QuantizedPlane, PackingRecord]:
    desc, impl, _ = _resolve(bs.codec_id)
    rows, cols = packed_dims(bs.record.original_shape, bs.record.layout_rule)
    quality = QualityLevel(bs.lam, allow_off_grid=True)
    codes = impl.decode(bs.payload, rows, cols, bs.bit_depth, quality)
    transform = MonotoneTransform(bs.breakpoints)
    plane = QuantizedPlane(codes=codes, bit_depth=bs.bit_depth, transform=transform)
    return plane, bs.record


def serialize_header(bs: Bitstream) -> bytes:
    _, _, wire_id = _resolve(bs.codec_id)
    shape = bs.record.original_shape
    parts = [
        MAGIC,
        struct.pack("<BBfB", bs.version, wire_id, bs.lam, bs.bit_depth),
        struct.pack("<B", len(shape)),
        struct.pack(f"<{len(shape)}I", *shape),
        struct.pack("<B", _LAYOUT_WIRE[bs.record.layout_rule]),
        struct.pack("<H", len(bs.breakpoints)),
        np.asarray(bs.breakpoints, dtype="<f4").tobytes(),
        struct.pack("<I", len(bs.payload)),
    ]
    return b"".join(parts)


def serialize(bs: Bitstream) -> bytes:
    return serialize_header(bs) + bs.payload


def deserialize(data: bytes) -> Bitstream:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}")
    off = 4
    try:
        version, wire_id, lam, bit_depth = struct.unpack_from("<BBfB", data, off)
        off += 7
        if version != BITSTREAM_VERSION:
            raise BitstreamVersionError(f"bitstream version {version}, expected {BITSTREAM_VERSION}")
        (rank,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        (layout_wire,) = struct.unpack_from("<B", data, off)
        off += 1
        (knots,) = struct.unpack_from("<H", data, off)
        off += 2
        bp = np.frombuffer(data, dtype="<f4", count=knots, offset=off).copy()
        off += 4 * knots
        (payload_len,) = struct.unpack_from("<I", data, off)
        off += 4
    except struct.error as exc:
        raise TruncatedPayloadError(f"truncated header: {exc}") from None
    if layout_wire not in _LAYOUT_FROM_WIRE:
        raise BitstreamFormatError(f"unknown layout rule code {layout_wire}")
    if wire_id not in _wire_ids:
        raise UnknownCodecError(f"unknown codec wire id {wire_id}")
    payload = data[off : off + payload_len]
    if len(payload) != payload_len:
        raise TruncatedPayloadError(f"payload: expected {payload_len} bytes, have {len(payload)}")
    record = PackingRecord(
        tensor_id="",
        original_shape=tuple(shape),
        layout_rule=_LAYOUT_FROM_WIRE[layout_wire],
    )
    return Bitstream(
        codec_id=_wire_ids[wire_id],
        lam=float(lam),
        bit_depth=bit_depth,
        record=record,
        breakpoints=bp,
        payload=payload,
        version=version,
    )


def write_bitstream(bs: Bitstream, path: str | Path) -> None:
    Path(path).write_bytes(serialize(bs))


def read_bitstream(path: str | Path) -> Bitstream:
    return deserialize(Path(path).read_bytes())
