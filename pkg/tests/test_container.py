import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featcode.container import (
    DuplicateTensorIdError,
    FeatureTensor,
    NonFiniteValueError,
    OffsetBoundsError,
    Precision,
    TruncatedBlobError,
    VersionMismatchError,
    container_paths,
    quantize_to_precision,
    read_container,
    read_manifest,
    validate_manifest,
    write_container,
)


def _tensor(tid="t0", shape=(2, 3), precision=Precision.FP32, seed=0, role="hidden_state"):
    rng = np.random.default_rng(seed)
    values = quantize_to_precision(rng.normal(size=int(np.prod(shape))), precision)
    return FeatureTensor(id=tid, precision=precision, shape=shape, values=values, role=role)


class TestRoundTrip:
    def test_identity_fp32(self, tmp_path):
        tensors = [_tensor("a", (4, 5)), _tensor("b", (7,), seed=1)]
        write_container(tensors, tmp_path / "set")
        back = read_container(tmp_path / "set")
        assert [t.id for t in back] == ["a", "b"]
        for orig, rt in zip(tensors, back):
            assert orig.precision == rt.precision
            assert orig.shape == rt.shape
            assert np.array_equal(orig.values, rt.values)
            assert orig.role == rt.role

    @pytest.mark.parametrize("precision", list(Precision))
    def test_identity_all_precisions(self, tmp_path, precision):
        t = _tensor("x", (13, 9), precision=precision, seed=3)
        write_container([t], tmp_path / "s")
        (rt,) = read_container(tmp_path / "s")
        assert np.array_equal(t.values, rt.values)
        # element bytes stable across a second round trip
        write_container([rt], tmp_path / "s2")
        assert (tmp_path / "s.blob").read_bytes() == (tmp_path / "s2.blob").read_bytes()

    @settings(max_examples=25, deadline=None)
    @given(
        shapes=st.lists(
            st.lists(st.integers(1, 6), min_size=1, max_size=4), min_size=1, max_size=4
        ),
        precision=st.sampled_from(list(Precision)),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip_property(self, tmp_path_factory, shapes, precision, seed):
        tmp = tmp_path_factory.mktemp("rt")
        tensors = [
            _tensor(f"t{i}", tuple(s), precision=precision, seed=seed + i)
            for i, s in enumerate(shapes)
        ]
        write_container(tensors, tmp / "c")
        back = read_container(tmp / "c")
        for orig, rt in zip(tensors, back):
            assert orig.shape == rt.shape
            assert np.array_equal(orig.values, rt.values)


class TestSizes:
    def test_fp32_blob_length(self, tmp_path):
        t = _tensor("vit", (1029, 4096))
        write_container([t], tmp_path / "vit")
        assert (tmp_path / "vit.blob").stat().st_size == 1029 * 4096 * 4

    def test_fp16_payload_bytes(self, tmp_path):
        t = _tensor("h", (1000,), precision=Precision.FP16)
        manifest = write_container([t], tmp_path / "h")
        assert manifest.tensors[0].length == 2000
        assert (tmp_path / "h.blob").stat().st_size == 2000

    def test_blob_size_is_sum_of_extents(self, tmp_path):
        tensors = [
            _tensor("a", (3, 5)),
            _tensor("b", (10,), precision=Precision.BF16, seed=1),
            _tensor("c", (2, 2, 2), precision=Precision.FP16, seed=2),
        ]
        manifest = write_container(tensors, tmp_path / "mix")
        total = sum(e.length for e in manifest.tensors)
        assert (tmp_path / "mix.blob").stat().st_size == total
        assert [e.offset for e in manifest.tensors] == [0, 60, 80]


class TestErrors:
    def test_duplicate_id(self, tmp_path):
        with pytest.raises(DuplicateTensorIdError):
            write_container([_tensor("dup"), _tensor("dup", seed=1)], tmp_path / "d")

    def test_non_finite_rejected_at_construction(self):
        with pytest.raises(NonFiniteValueError):
            FeatureTensor("bad", Precision.FP32, (2,), np.array([1.0, np.inf]))

    def test_non_finite_rejected_at_write(self, tmp_path):
        t = _tensor("x", (4,))
        t.values[1] = np.nan  # mutate after construction
        with pytest.raises(NonFiniteValueError):
            write_container([t], tmp_path / "x")

    def test_version_mismatch(self, tmp_path):
        write_container([_tensor()], tmp_path / "v")
        mpath, _ = container_paths(tmp_path / "v")
        doc = json.loads(mpath.read_text())
        doc["format_version"] = 99
        mpath.write_text(json.dumps(doc))
        with pytest.raises(VersionMismatchError):
            read_container(tmp_path / "v")

    def test_truncated_blob(self, tmp_path):
        write_container([_tensor("x", (10,))], tmp_path / "t")
        _, bpath = container_paths(tmp_path / "t")
        bpath.write_bytes(bpath.read_bytes()[:-4])
        with pytest.raises(TruncatedBlobError):
            read_container(tmp_path / "t")

    def test_offset_out_of_bounds(self, tmp_path):
        write_container([_tensor("x", (10,))], tmp_path / "o")
        mpath, bpath = container_paths(tmp_path / "o")
        doc = json.loads(mpath.read_text())
        doc["tensors"][0]["offset"] = 10_000
        mpath.write_text(json.dumps(doc))
        with pytest.raises((OffsetBoundsError, TruncatedBlobError)):
            read_container(tmp_path / "o")


class TestValidateManifest:
    def test_well_formed_is_empty(self, tmp_path):
        manifest = write_container([_tensor("a"), _tensor("b", seed=1)], tmp_path / "ok")
        _, bpath = container_paths(tmp_path / "ok")
        assert validate_manifest(manifest, bpath.stat().st_size) == []

    def test_overlap_names_both_ids(self, tmp_path):
        manifest = write_container([_tensor("a", (4,)), _tensor("b", (4,), seed=1)], tmp_path / "ov")
        entries = manifest.tensors
        bad = type(entries[1])(
            id="b", precision=entries[1].precision, shape=entries[1].shape,
            offset=entries[1].offset - 8, length=entries[1].length,
        )
        manifest.tensors = [entries[0], bad]
        findings = validate_manifest(manifest, 32)
        overlaps = [f for f in findings if f.code == "overlap"]
        assert len(overlaps) == 1
        assert "'a'" in overlaps[0].message and "'b'" in overlaps[0].message

    def test_offset_beyond_blob(self, tmp_path):
        manifest = write_container([_tensor("a", (4,))], tmp_path / "bb")
        findings = validate_manifest(manifest, blob_length=8)
        assert any(f.code == "bounds" for f in findings)

    def test_duplicate_id_finding(self, tmp_path):
        manifest = write_container([_tensor("a", (4,))], tmp_path / "dd")
        manifest.tensors = manifest.tensors * 2
        findings = validate_manifest(manifest, 32)
        assert any(f.code == "duplicate-id" for f in findings)


def test_manifest_order_preserves_input_order(tmp_path):
    names = [f"t{i}" for i in range(6)]
    tensors = [_tensor(n, (3,), seed=i) for i, n in enumerate(names)]
    manifest = write_container(tensors, tmp_path / "ord")
    assert [e.id for e in manifest.tensors] == names
    assert [t.id for t in read_container(tmp_path / "ord")] == names
    assert read_manifest(tmp_path / "ord").to_dict() == manifest.to_dict()
