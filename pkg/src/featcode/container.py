"""On-disk container for heterogeneous model features.

A container is a pair of files sharing a stem: ``<name>.manifest.json``
(human-readable index) and ``<name>.blob`` (concatenated raw element
bytes, little-endian, row-major). Elements are stored at each tensor's
declared source precision; bf16 keeps its native 16-bit pattern.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class ContainerError(Exception):
    """Base class for container format violations."""


class DuplicateTensorIdError(ContainerError):
    pass


class NonFiniteValueError(ContainerError):
    pass


class VersionMismatchError(ContainerError):
    pass


class TruncatedBlobError(ContainerError):
    pass


class OffsetBoundsError(ContainerError):
    pass


class Precision(enum.Enum):
    """Source scalar precision of a feature tensor."""

    FP32 = "fp32"
    FP16 = "fp16"
    BF16 = "bf16"

    @property
    def bit_width(self) -> int:
        return 32 if self is Precision.FP32 else 16

    @classmethod
    def from_name(cls, name: str) -> "Precision":
        try:
            return cls(name.lower())
        except ValueError:
            raise ContainerError(f"unknown precision {name!r}") from None


def _f32_to_bf16_bits(values: np.ndarray) -> np.ndarray:
    """Round float32 to bf16 bit patterns (round-to-nearest-even)."""
    u = np.ascontiguousarray(values, dtype="<f4").view("<u4")
    rounding_bias = np.uint32(0x7FFF) + ((u >> np.uint32(16)) & np.uint32(1))
    return ((u + rounding_bias) >> np.uint32(16)).astype("<u2")


def _bf16_bits_to_f32(bits: np.ndarray) -> np.ndarray:
    return (bits.astype("<u4") << np.uint32(16)).view("<f4")


def quantize_to_precision(values: np.ndarray, precision: Precision) -> np.ndarray:
    """Snap float values to the nearest value representable at `precision`.

    Returns float32. Used to build tensors that round-trip the container
    bit-exactly at 16-bit precisions.
    """
    v = np.asarray(values, dtype=np.float32)
    if precision is Precision.FP32:
        return v
    if precision is Precision.FP16:
        return v.astype(np.float16).astype(np.float32)
    return _bf16_bits_to_f32(_f32_to_bf16_bits(v)).astype(np.float32)


@dataclass
class FeatureTensor:
    """A named real-valued tensor with declared source precision.

    `values` are held as float32 in row-major order regardless of the
    declared precision; the precision governs serialization and the
    per-element raw bit count used by the rate metrics.
    """

    id: str
    precision: Precision
    shape: tuple[int, ...]
    values: np.ndarray
    role: str = ""
    source: str = ""

    def __post_init__(self) -> None:
        self.shape = tuple(int(d) for d in self.shape)
        if len(self.shape) == 0:
            raise ContainerError(f"tensor {self.id!r}: empty shape")
        if any(d <= 0 for d in self.shape):
            raise ContainerError(f"tensor {self.id!r}: non-positive dimension in {self.shape}")
        self.values = np.ascontiguousarray(self.values, dtype=np.float32).reshape(-1)
        if self.values.size != self.element_count:
            raise ContainerError(
                f"tensor {self.id!r}: {self.values.size} values for shape {self.shape}"
            )
        if not np.isfinite(self.values).all():
            raise NonFiniteValueError(f"tensor {self.id!r}: non-finite values")

    @property
    def element_count(self) -> int:
        return math.prod(self.shape)

    @property
    def raw_bits(self) -> int:
        """Total size in bits at the declared source precision."""
        return self.element_count * self.precision.bit_width

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.shape)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    precision: Precision
    shape: tuple[int, ...]
    offset: int
    length: int
    role: str = ""
    source: str = ""


@dataclass
class FeatureManifest:
    set_name: str
    tensors: list[ManifestEntry] = field(default_factory=list)
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "set_name": self.set_name,
            "tensors": [
                {
                    "id": e.id,
                    "precision": e.precision.value,
                    "shape": list(e.shape),
                    "offset": e.offset,
                    "length": e.length,
                    "role": e.role,
                    "source": e.source,
                }
                for e in self.tensors
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureManifest":
        entries = [
            ManifestEntry(
                id=t["id"],
                precision=Precision.from_name(t["precision"]),
                shape=tuple(int(x) for x in t["shape"]),
                offset=int(t["offset"]),
                length=int(t["length"]),
                role=t.get("role", ""),
                source=t.get("source", ""),
            )
            for t in d["tensors"]
        ]
        return cls(
            set_name=d.get("set_name", ""),
            tensors=entries,
            format_version=int(d["format_version"]),
        )


def container_paths(path: str | Path) -> tuple[Path, Path]:
    """Map a container stem to its (manifest, blob) file pair."""
    stem = Path(path)
    name = stem.name
    for suffix in (".manifest.json", ".blob"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    stem = stem.with_name(name)
    return stem.with_name(name + ".manifest.json"), stem.with_name(name + ".blob")


def _encode_elements(tensor: FeatureTensor) -> bytes:
    if tensor.precision is Precision.FP32:
        return tensor.values.astype("<f4").tobytes()
    if tensor.precision is Precision.FP16:
        return tensor.values.astype("<f2").tobytes()
    return _f32_to_bf16_bits(tensor.values).tobytes()


def _decode_elements(raw: bytes, entry: ManifestEntry) -> np.ndarray:
    if entry.precision is Precision.FP32:
        return np.frombuffer(raw, dtype="<f4").astype(np.float32)
    if entry.precision is Precision.FP16:
        return np.frombuffer(raw, dtype="<f2").astype(np.float32)
    return _bf16_bits_to_f32(np.frombuffer(raw, dtype="<u2")).astype(np.float32)


def write_container(tensors: list[FeatureTensor], path: str | Path) -> FeatureManifest:
    """Write tensors to ``<path>.manifest.json`` + ``<path>.blob``.

    Tensors are laid out back to back in input order. Raises
    DuplicateTensorIdError / NonFiniteValueError before touching disk;
    I/O failures propagate as OSError.
    """
    seen: set[str] = set()
    for t in tensors:
        if t.id in seen:
            raise DuplicateTensorIdError(f"duplicate tensor id {t.id!r}")
        seen.add(t.id)
        if not np.isfinite(t.values).all():
            raise NonFiniteValueError(f"tensor {t.id!r}: non-finite values")

    manifest_path, blob_path = container_paths(path)
    entries = []
    offset = 0
    chunks = []
    for t in tensors:
        raw = _encode_elements(t)
        entries.append(
            ManifestEntry(
                id=t.id,
                precision=t.precision,
                shape=t.shape,
                offset=offset,
                length=len(raw),
                role=t.role,
                source=t.source,
            )
        )
        chunks.append(raw)
        offset += len(raw)

    manifest = FeatureManifest(set_name=manifest_path.name[: -len(".manifest.json")], tensors=entries)
    blob_path.write_bytes(b"".join(chunks))
    manifest_path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(path: str | Path) -> FeatureManifest:
    manifest_path, _ = container_paths(path)
    manifest = FeatureManifest.from_dict(json.loads(manifest_path.read_text()))
    if manifest.format_version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"manifest version {manifest.format_version}, expected {FORMAT_VERSION}"
        )
    return manifest


def read_container(path: str | Path) -> list[FeatureTensor]:
    """Read all tensors from a container, in manifest order."""
    manifest = read_manifest(path)
    _, blob_path = container_paths(path)
    blob = blob_path.read_bytes()
    tensors = []
    for e in manifest.tensors:
        if e.offset < 0 or e.offset > len(blob):
            raise OffsetBoundsError(f"tensor {e.id!r}: offset {e.offset} outside blob")
        if e.offset + e.length > len(blob):
            raise TruncatedBlobError(
                f"tensor {e.id!r}: needs bytes up to {e.offset + e.length}, blob has {len(blob)}"
            )
        raw = blob[e.offset : e.offset + e.length]
        tensors.append(
            FeatureTensor(
                id=e.id,
                precision=e.precision,
                shape=e.shape,
                values=_decode_elements(raw, e),
                role=e.role,
                source=e.source,
            )
        )
    return tensors


@dataclass(frozen=True)
class Finding:
    code: str
    message: str


def validate_manifest(manifest: FeatureManifest, blob_length: int) -> list[Finding]:
    """Diagnostic check of every manifest invariant; empty list iff valid."""
    findings: list[Finding] = []
    if manifest.format_version != FORMAT_VERSION:
        findings.append(
            Finding("version", f"format_version {manifest.format_version} != {FORMAT_VERSION}")
        )
    seen: dict[str, int] = {}
    for e in manifest.tensors:
        if e.id in seen:
            findings.append(Finding("duplicate-id", f"id {e.id!r} appears more than once"))
        seen[e.id] = seen.get(e.id, 0) + 1
        expected = math.prod(e.shape) * e.precision.bit_width // 8
        if e.length != expected:
            findings.append(
                Finding(
                    "length-mismatch",
                    f"{e.id!r}: length {e.length} != shape/precision size {expected}",
                )
            )
        if e.offset < 0 or e.offset + e.length > blob_length:
            findings.append(
                Finding(
                    "bounds",
                    f"{e.id!r}: extent [{e.offset}, {e.offset + e.length}) outside blob of {blob_length} bytes",
                )
            )
    ordered = sorted(manifest.tensors, key=lambda e: e.offset)
    if [e.id for e in ordered] != [e.id for e in manifest.tensors]:
        findings.append(Finding("order", "entries not ordered by offset"))
    for a, b in zip(ordered, ordered[1:]):
        if a.offset + a.length > b.offset:
            findings.append(Finding("overlap", f"{a.id!r} and {b.id!r} overlap"))
    return findings
