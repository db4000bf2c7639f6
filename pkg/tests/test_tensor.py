import io

import numpy as np
import pytest

from qftmpo.errors import DimensionMismatchError, NumericalError
from qftmpo.tensor import (
    DenseTensor,
    SvdResult,
    TruncationPolicy,
    contract,
    read_tensor,
    read_tensor_from,
    reshape_permute,
    retained_count,
    svd_truncated,
    write_tensor,
    write_tensor_to,
)


class TestDenseTensor:
    def test_copies_and_freezes(self):
        raw = np.ones((2, 3))
        t = DenseTensor(raw)
        raw[0, 0] = 5.0
        assert t.data[0, 0] == 1.0
        with pytest.raises(ValueError):
            t.data[0, 0] = 2.0

    def test_complex_cast(self):
        t = DenseTensor([[1, 2], [3, 4]])
        assert t.data.dtype == np.complex128
        assert t.shape == (2, 2)
        assert t.size == 4

    def test_rejects_non_finite(self):
        with pytest.raises(NumericalError):
            DenseTensor([1.0, np.nan])
        with pytest.raises(NumericalError):
            DenseTensor([1.0, np.inf])

    def test_labels_checked(self):
        t = DenseTensor(np.zeros((2, 2)), labels=("in", "out"))
        assert t.labels == ("in", "out")
        with pytest.raises(DimensionMismatchError):
            DenseTensor(np.zeros((2, 2)), labels=("only",))

    def test_relabel(self):
        t = DenseTensor(np.zeros((2, 2)))
        got = t.relabel(("a", "b"))
        assert got.labels == ("a", "b")
        assert np.array_equal(got.data, t.data)

    def test_array_protocol(self):
        t = DenseTensor([[1, 0], [0, 1]])
        assert np.trace(t) == 2


class TestTruncationPolicy:
    def test_defaults(self):
        p = TruncationPolicy()
        assert p.rel_cutoff == 0.0
        assert p.max_rank is None

    @pytest.mark.parametrize("cutoff", [-0.1, 1.0, 1.5])
    def test_bad_cutoff(self, cutoff):
        with pytest.raises(ValueError):
            TruncationPolicy(rel_cutoff=cutoff)

    def test_bad_rank(self):
        with pytest.raises(ValueError):
            TruncationPolicy(max_rank=0)

    def test_hashable(self):
        assert hash(TruncationPolicy(1e-10, 8)) == hash(TruncationPolicy(1e-10, 8))


class TestRetainedCount:
    def test_relative_cutoff(self):
        s = np.array([1.0, 0.5, 1e-8, 1e-12])
        assert retained_count(s, TruncationPolicy(1e-10)) == 3
        assert retained_count(s, TruncationPolicy(1e-6)) == 2

    def test_always_keeps_one(self):
        s = np.array([1e-30])
        assert retained_count(s, TruncationPolicy(0.5)) == 1

    def test_rank_cap_wins(self):
        s = np.ones(10)
        assert retained_count(s, TruncationPolicy(0.0, 4)) == 4

    def test_extra_cutoff(self):
        s = np.array([1.0, 1e-5, 1e-15])
        assert retained_count(s, TruncationPolicy(0.0), extra_cutoff=1e-10) == 2


class TestContract:
    def test_matches_tensordot(self, rng):
        a = DenseTensor(rng.normal(size=(2, 3, 4)))
        b = DenseTensor(rng.normal(size=(4, 3, 5)))
        got = contract(a, b, [(2, 0), (1, 1)])
        want = np.tensordot(a.data, b.data, axes=((2, 1), (0, 1)))
        assert np.allclose(got.data, want)

    def test_dimension_mismatch(self):
        a = DenseTensor(np.zeros((2, 3)))
        b = DenseTensor(np.zeros((4, 5)))
        with pytest.raises(DimensionMismatchError):
            contract(a, b, [(1, 0)])

    def test_label_propagation(self):
        a = DenseTensor(np.zeros((2, 3)), labels=("keepA", "sum"))
        b = DenseTensor(np.zeros((3, 4)), labels=("sum", "keepB"))
        got = contract(a, b, [(1, 0)])
        assert got.labels == ("keepA", "keepB")


class TestReshapePermute:
    def test_roundtrip(self, rng):
        t = DenseTensor(rng.normal(size=(2, 3, 4)))
        got = reshape_permute(t, (2, 0, 1), (4, 6))
        want = t.data.transpose(2, 0, 1).reshape(4, 6)
        assert np.allclose(got.data, want)

    def test_size_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            reshape_permute(DenseTensor(np.zeros((2, 3))), (0, 1), (5,))


class TestSvdTruncated:
    def test_exact_recompose(self, rng):
        t = DenseTensor(rng.normal(size=(3, 4, 5)) + 1j * rng.normal(size=(3, 4, 5)))
        res = svd_truncated(t, left_axes=(0, 1), policy=TruncationPolicy())
        assert isinstance(res, SvdResult)
        assert res.discarded_weight == 0.0
        assert np.allclose(res.recompose(), t.data, atol=1e-12)

    def test_truncation_drops_weight(self, rng):
        u = np.linalg.qr(rng.normal(size=(6, 6)))[0]
        v = np.linalg.qr(rng.normal(size=(6, 6)))[0]
        s = np.array([1.0, 0.5, 1e-3, 1e-9, 1e-9, 1e-12])
        mat = (u * s) @ v
        res = svd_truncated(DenseTensor(mat), left_axes=(0,), policy=TruncationPolicy(1e-6))
        assert res.rank == 3
        assert res.discarded_weight == pytest.approx(2e-18 + 1e-24, rel=1e-6)
        assert np.allclose(res.recompose(), mat, atol=1e-8)

    def test_isometry_conditions(self, rng):
        t = DenseTensor(rng.normal(size=(4, 4)))
        res = svd_truncated(t, left_axes=(0,), policy=TruncationPolicy())
        left = res.left_isometry.data.reshape(-1, res.rank)
        assert np.allclose(left.conj().T @ left, np.eye(res.rank), atol=1e-12)
        right = res.right_isometry.data.reshape(res.rank, -1)
        assert np.allclose(right @ right.conj().T, np.eye(res.rank), atol=1e-12)

    def test_singular_values_sorted(self, rng):
        t = DenseTensor(rng.normal(size=(5, 7)))
        res = svd_truncated(t, left_axes=(0,), policy=TruncationPolicy())
        s = res.singular_values
        assert np.all(np.diff(s) <= 0)
        assert np.all(s > 0)


class TestSerialization:
    def test_stream_roundtrip(self, rng):
        t = DenseTensor(rng.normal(size=(2, 3, 4)) + 1j * rng.normal(size=(2, 3, 4)))
        buf = io.BytesIO()
        write_tensor_to(buf, t)
        buf.seek(0)
        back = read_tensor_from(buf)
        assert back.shape == t.shape
        assert np.array_equal(back.data, t.data)

    def test_path_roundtrip(self, tmp_path, rng):
        t = DenseTensor(rng.normal(size=(4, 4)))
        path = tmp_path / "t.bin"
        write_tensor(path, t)
        assert np.array_equal(read_tensor(path).data, t.data)

    def test_bad_magic(self):
        buf = io.BytesIO(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError):
            read_tensor_from(buf)

    def test_scalar_tensor(self):
        t = DenseTensor(np.array(3.0 + 1j))
        buf = io.BytesIO()
        write_tensor_to(buf, t)
        buf.seek(0)
        assert read_tensor_from(buf).data == 3.0 + 1j
