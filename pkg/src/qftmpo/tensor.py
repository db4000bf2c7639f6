"""Dense complex tensors: contraction, axis reshuffling, truncated SVD.

Values are immutable; every operation returns a fresh tensor. Data is
stored row-major as complex128, which is also the on-disk layout (see
`write_tensor`). The heavy lifting is delegated to LAPACK via numpy, with
a scipy fallback driver for the occasional non-converging SVD.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, NumericalError

TENSOR_MAGIC = b"MPOT"
TENSOR_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable complex tensor with optional axis labels.

    ``labels`` tags axes for bookkeeping (bond names, physical legs); tags
    are carried through operations where that makes sense but are never
    interpreted.
    """

    data: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.complex128, order="C", copy=True)
        if not np.all(np.isfinite(arr)):
            raise NumericalError("tensor has non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.labels is not None:
            labels = tuple(str(lab) for lab in self.labels)
            if len(labels) != arr.ndim:
                raise DimensionMismatchError(
                    f"{len(labels)} labels given for a rank-{arr.ndim} tensor"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def relabel(self, labels: Sequence[str] | None) -> "DenseTensor":
        return DenseTensor(self.data, None if labels is None else tuple(labels))


@dataclass(frozen=True)
class TruncationPolicy:
    """How to cut a singular value spectrum.

    ``rel_cutoff`` drops every s_i with s_i / s_max strictly below the
    cutoff; ``max_rank`` additionally caps the retained count (None means
    unbounded). At least one value is always kept.
    """

    rel_cutoff: float = 0.0
    max_rank: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.rel_cutoff < 1.0:
            raise ValueError(f"rel_cutoff must lie in [0, 1), got {self.rel_cutoff}")
        if self.max_rank is not None and self.max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {self.max_rank}")


@dataclass(frozen=True, eq=False)
class SvdResult:
    """Truncated SVD of a tensor split into a (left | right) axis group.

    ``left_isometry`` has the left axes plus a trailing rank axis,
    ``right_isometry`` a leading rank axis plus the right axes.
    ``discarded_weight`` is the sum of squared dropped singular values,
    which equals the squared Frobenius distance to the recomposition.
    """

    left_isometry: DenseTensor
    singular_values: np.ndarray
    right_isometry: DenseTensor
    discarded_weight: float

    def __post_init__(self):
        vals = np.array(self.singular_values, dtype=np.float64, copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "singular_values", vals)

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    def recompose(self) -> DenseTensor:
        """Multiply the three factors back into a single tensor."""
        left = self.left_isometry.data
        right = self.right_isometry.data
        k = self.rank
        mat = (left.reshape(-1, k) * self.singular_values) @ right.reshape(k, -1)
        return DenseTensor(mat.reshape(left.shape[:-1] + right.shape[1:]))


def _svd_matrix(mat: np.ndarray, context: str = "") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD with a fallback driver; raises NumericalError on a hard failure."""
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    try:
        # gesvd is slower but converges on matrices where gesdd gives up
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
    except Exception as exc:  # pragma: no cover - defensive
        where = f" ({context})" if context else ""
        raise NumericalError(f"SVD did not converge for shape {mat.shape}{where}") from exc


def retained_count(s: np.ndarray, policy: TruncationPolicy, extra_cutoff: float = 0.0) -> int:
    """Number of leading singular values kept under ``policy``.

    ``extra_cutoff`` lets callers impose a noise floor on top of the policy;
    the effective relative cutoff is the larger of the two.
    """
    if len(s) == 0:
        return 0
    cutoff = max(policy.rel_cutoff, extra_cutoff)
    if cutoff > 0.0:
        k = int(np.count_nonzero(s >= cutoff * s[0]))
    else:
        k = len(s)
    k = max(k, 1)
    if policy.max_rank is not None:
        k = min(k, policy.max_rank)
    return k


def contract(a: DenseTensor, b: DenseTensor, axis_pairs: Sequence[tuple[int, int]]) -> DenseTensor:
    """Contract ``a`` with ``b`` over the given (axis of a, axis of b) pairs.

    Result axes are the unpaired axes of ``a`` followed by the unpaired axes
    of ``b``, in their original order. An empty pair list is an outer
    product.
    """
    axes_a = [p[0] for p in axis_pairs]
    axes_b = [p[1] for p in axis_pairs]
    for name, axes, t in (("a", axes_a, a), ("b", axes_b, b)):
        if len(set(axes)) != len(axes):
            raise ValueError(f"repeated contraction axis for operand {name}: {axes}")
        for ax in axes:
            if not -t.ndim <= ax < t.ndim:
                raise DimensionMismatchError(
                    f"axis {ax} out of range for operand {name} with rank {t.ndim}"
                )
    for ax_a, ax_b in axis_pairs:
        if a.shape[ax_a] != b.shape[ax_b]:
            raise DimensionMismatchError(
                f"cannot contract axis {ax_a} (dim {a.shape[ax_a]}) of {a.shape} "
                f"with axis {ax_b} (dim {b.shape[ax_b]}) of {b.shape}"
            )
    out = np.tensordot(a.data, b.data, axes=(axes_a, axes_b))
    labels = None
    if a.labels is not None and b.labels is not None:
        norm_a = {ax % a.ndim for ax in axes_a}
        norm_b = {ax % b.ndim for ax in axes_b}
        labels = tuple(
            [lab for i, lab in enumerate(a.labels) if i not in norm_a]
            + [lab for i, lab in enumerate(b.labels) if i not in norm_b]
        )
    return DenseTensor(out, labels)


def reshape_permute(t: DenseTensor, perm: Sequence[int], new_shape: Sequence[int]) -> DenseTensor:
    """Transpose axes by ``perm``, then reshape row-major to ``new_shape``."""
    perm = tuple(perm)
    if sorted(perm) != list(range(t.ndim)):
        raise ValueError(f"perm {perm} is not a permutation of axes 0..{t.ndim - 1}")
    new_shape = tuple(int(d) for d in new_shape)
    if math.prod(new_shape) != t.size:
        raise DimensionMismatchError(
            f"cannot reshape {t.size} entries into shape {new_shape}"
        )
    return DenseTensor(np.ascontiguousarray(np.transpose(t.data, perm)).reshape(new_shape))


def svd_truncated(t: DenseTensor, left_axes: Sequence[int], policy: TruncationPolicy) -> SvdResult:
    """Truncated SVD of ``t`` split into (left_axes | remaining axes)."""
    left = tuple(ax % t.ndim for ax in left_axes)
    if len(set(left)) != len(left):
        raise ValueError(f"repeated axis in left_axes: {left_axes}")
    if not left or len(left) >= t.ndim:
        raise ValueError("left_axes must be a nonempty proper subset of the axes")
    right = tuple(ax for ax in range(t.ndim) if ax not in left)
    left_shape = tuple(t.shape[ax] for ax in left)
    right_shape = tuple(t.shape[ax] for ax in right)
    mat = np.transpose(t.data, left + right).reshape(math.prod(left_shape), math.prod(right_shape))
    u, s, vh = _svd_matrix(mat, context=f"shape {t.shape}, left axes {left}")
    k = retained_count(s, policy)
    discarded = float(np.sum(s[k:] ** 2))
    return SvdResult(
        left_isometry=DenseTensor(u[:, :k].reshape(left_shape + (k,))),
        singular_values=s[:k],
        right_isometry=DenseTensor(vh[:k].reshape((k,) + right_shape)),
        discarded_weight=discarded,
    )


# ---------------------------------------------------------------- #
# binary serialization
# ---------------------------------------------------------------- #
# layout: magic "MPOT" | u32 version | u32 rank | rank * u64 shape |
# row-major entries as little-endian f64 pairs (re, im).

def write_tensor_to(f: BinaryIO, t: DenseTensor) -> None:
    f.write(TENSOR_MAGIC)
    f.write(struct.pack("<II", TENSOR_FORMAT_VERSION, t.ndim))
    f.write(struct.pack(f"<{t.ndim}Q", *t.shape))
    f.write(t.data.astype("<c16", copy=False).tobytes())


def read_tensor_from(f: BinaryIO) -> DenseTensor:
    magic = f.read(4)
    if magic != TENSOR_MAGIC:
        raise ValueError(f"bad tensor magic {magic!r}, expected {TENSOR_MAGIC!r}")
    version, rank = struct.unpack("<II", f.read(8))
    if version != TENSOR_FORMAT_VERSION:
        raise ValueError(f"unsupported tensor format version {version}")
    if rank > 64:
        raise ValueError(f"implausible tensor rank {rank}")
    shape = struct.unpack(f"<{rank}Q", f.read(8 * rank))
    count = math.prod(shape) if shape else 1
    raw = f.read(16 * count)
    if len(raw) != 16 * count:
        raise ValueError("truncated tensor payload")
    data = np.frombuffer(raw, dtype="<c16").reshape(shape)
    return DenseTensor(data)


def write_tensor(dest: str | Path | BinaryIO, t: DenseTensor) -> None:
    """Write a tensor to a path or an open binary stream."""
    if isinstance(dest, (str, Path)):
        with open(dest, "wb") as f:
            write_tensor_to(f, t)
    else:
        write_tensor_to(dest, t)


def read_tensor(src: str | Path | BinaryIO) -> DenseTensor:
    """Read a tensor written by `write_tensor`."""
    if isinstance(src, (str, Path)):
        with open(src, "rb") as f:
            return read_tensor_from(f)
    return read_tensor_from(src)
