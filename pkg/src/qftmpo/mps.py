"""Matrix product states for qubit chains, stored in canonical form.

Storage convention: per-site tensors ``gammas[j]`` with legs
(left bond, physical, right bond) and one non-negative vector per bond
holding the Schmidt coefficients of the state across that bond, sorted
non-increasing with unit 2-norm. Site 0 is the most significant qubit of
basis-index bookkeeping, so ``to_dense`` lays amplitudes out in plain
binary order.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _canonical
from .errors import (
    DimensionMismatchError,
    NonAdjacentGateError,
    NumericalError,
    ResourceLimitError,
)
from .tensor import DenseTensor, TruncationPolicy, read_tensor_from, write_tensor_to

MPS_MAGIC = b"MPSC"
MPS_FORMAT_VERSION = 1
DENSE_STATE_LIMIT = 20  # qubits; override with QFTMPO_DENSE_LIMIT


def _dense_limit(default: int) -> int:
    raw = os.environ.get("QFTMPO_DENSE_LIMIT")
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"QFTMPO_DENSE_LIMIT must be an integer, got {raw!r}") from None


def _check_unitary(mat: np.ndarray, dim: int, tol: float = 1e-10) -> None:
    if mat.shape != (dim, dim):
        raise DimensionMismatchError(f"expected a {dim}x{dim} gate, got shape {mat.shape}")
    defect = np.max(np.abs(mat @ mat.conj().T - np.eye(dim)))
    if defect > tol:
        raise ValueError(f"gate is not unitary (defect {defect:.2e} > {tol:.0e})")


def _parse_bits(bits, n: int) -> tuple[int, ...]:
    if isinstance(bits, str):
        vals = tuple(int(ch) for ch in bits)
    else:
        vals = tuple(int(b) for b in bits)
    if len(vals) != n or any(b not in (0, 1) for b in vals):
        raise ValueError(f"need {n} bits of 0/1, got {bits!r}")
    return vals


@dataclass(frozen=True, eq=False)
class CanonicalMps:
    """A normalized qubit chain in canonical form."""

    gammas: tuple[DenseTensor, ...]
    lambdas: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.gammas:
            raise ValueError("need at least one site")
        gammas = tuple(
            g if isinstance(g, DenseTensor) else DenseTensor(g) for g in self.gammas
        )
        lambdas = []
        for lam in self.lambdas:
            arr = np.array(lam, dtype=np.float64, copy=True)
            arr.setflags(write=False)
            lambdas.append(arr)
        lambdas = tuple(lambdas)
        n = len(gammas)
        if len(lambdas) != n - 1:
            raise DimensionMismatchError(
                f"{n} sites require {n - 1} bond vectors, got {len(lambdas)}"
            )
        left = 1
        for j, g in enumerate(gammas):
            if g.ndim != 3 or g.shape[1] != 2:
                raise DimensionMismatchError(f"site {j} has shape {g.shape}, want (l, 2, r)")
            if g.shape[0] != left:
                raise DimensionMismatchError(
                    f"site {j} left bond {g.shape[0]} != previous right bond {left}"
                )
            if j < n - 1 and g.shape[2] != len(lambdas[j]):
                raise DimensionMismatchError(
                    f"site {j} right bond {g.shape[2]} != bond vector length {len(lambdas[j])}"
                )
            left = g.shape[2]
        if gammas[-1].shape[2] != 1:
            raise DimensionMismatchError("right boundary bond must have dimension 1")
        for j, lam in enumerate(lambdas):
            if len(lam) == 0 or np.any(lam <= 0) or np.any(np.diff(lam) > 0):
                raise ValueError(f"bond {j} vector must be positive and non-increasing")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "lambdas", lambdas)

    # ---------------------------------------------------------------- #
    # constructors
    # ---------------------------------------------------------------- #

    @classmethod
    def from_basis_state(cls, n: int, bits) -> "CanonicalMps":
        """Product state |b_0 b_1 ... b_{n-1}>, site 0 most significant."""
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        vals = _parse_bits(bits, n)
        gammas = []
        for b in vals:
            g = np.zeros((1, 2, 1), dtype=np.complex128)
            g[0, b, 0] = 1.0
            gammas.append(g)
        lambdas = [np.ones(1)] * (n - 1)
        return cls(tuple(DenseTensor(g) for g in gammas), tuple(lambdas))

    @classmethod
    def from_periodic_state(cls, n_qubits: int, period: int, offset: int = 0) -> "CanonicalMps":
        """Uniform superposition of |offset + m*period> over all m that fit
        into n_qubits bits.

        Built from a residue automaton over the bits (most significant
        first), so the bond rank never exceeds ``period`` and no dense
        vector is materialized. The support count is
        floor((2^n - 1 - offset) / period) + 1.
        """
        if n_qubits < 1:
            raise ValueError(f"need n_qubits >= 1, got {n_qubits}")
        if not 1 <= period < 2**n_qubits:
            raise ValueError(f"period must lie in [1, 2^{n_qubits}), got {period}")
        if not 0 <= offset < period:
            raise ValueError(f"offset must lie in [0, period), got {offset}")
        r = period
        if n_qubits == 1:
            # support is {offset} (r > 1) or {0, 1} (r == 1)
            if r == 1:
                vec = np.full(2, 1 / math.sqrt(2), dtype=np.complex128)
            else:
                vec = np.zeros(2, dtype=np.complex128)
                vec[offset] = 1.0
            return cls.from_dense(vec, TruncationPolicy())
        # transition tensors of the automaton tracking (partial value mod r)
        first = np.zeros((1, 2, r), dtype=np.complex128)
        for b in (0, 1):
            first[0, b, b % r] = 1.0
        mid = np.zeros((r, 2, r), dtype=np.complex128)
        for rho in range(r):
            for b in (0, 1):
                mid[rho, b, (2 * rho + b) % r] = 1.0
        last = np.zeros((r, 2, 1), dtype=np.complex128)
        for rho in range(r):
            for b in (0, 1):
                if (2 * rho + b) % r == offset % r:
                    last[rho, b, 0] = 1.0
        train = [first] + [mid] * (n_qubits - 2) + [last]
        gammas, lambdas, _ = _canonical.canonicalize_train(
            train, TruncationPolicy(), normalize=True
        )
        return cls(tuple(DenseTensor(g) for g in gammas), tuple(lambdas))

    @classmethod
    def from_dense(cls, vec, policy: TruncationPolicy = TruncationPolicy()) -> "CanonicalMps":
        """Canonical form of a dense state vector (unit norm within 1e-8)."""
        arr = np.asarray(vec, dtype=np.complex128).reshape(-1)
        n = int(math.log2(len(arr)))
        if 2**n != len(arr):
            raise DimensionMismatchError(f"state length {len(arr)} is not a power of two")
        norm = np.linalg.norm(arr)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"state norm {norm} is not 1 within 1e-8")
        gammas, lambdas, _ = _canonical.vidal_from_vector(
            arr, n, 2, policy, normalize=True
        )
        return cls(tuple(DenseTensor(g) for g in gammas), tuple(lambdas))

    # ---------------------------------------------------------------- #
    # structure
    # ---------------------------------------------------------------- #

    @property
    def n_qubits(self) -> int:
        return len(self.gammas)

    @property
    def bond_ranks(self) -> tuple[int, ...]:
        return tuple(len(lam) for lam in self.lambdas)

    def bond_spectrum(self, bond: int) -> np.ndarray:
        """Schmidt coefficients across ``bond`` (between sites bond, bond+1)."""
        if not 0 <= bond < len(self.lambdas):
            raise ValueError(f"bond {bond} out of range for {self.n_qubits} qubits")
        return self.lambdas[bond].copy()

    def reverse_qubits(self) -> "CanonicalMps":
        """Mirror the chain (qubit order reversed). Exact; ranks unchanged."""
        gammas = tuple(
            DenseTensor(np.ascontiguousarray(g.data.transpose(2, 1, 0)))
            for g in reversed(self.gammas)
        )
        lambdas = tuple(reversed(self.lambdas))
        return CanonicalMps(gammas, lambdas)

    def canonical_defect(self) -> float:
        """Largest violation of the canonical conditions, bond-weighted.

        The isometry conditions are checked with both bond vectors folded
        in: left means W^dag W = diag(lambda_r^2), right means
        W W^dag = diag(lambda_l^2) for W = lambda_l * Gamma * lambda_r.
        The weighting keeps the measure stable when the spectrum spans many
        decades (bare Gamma conditions degrade as lambda_max/lambda_min);
        deviations are reported relative to the largest squared weight.
        """
        n = self.n_qubits
        worst = 0.0
        ones = np.ones(1)
        for j in range(n):
            g = self.gammas[j].data
            lam_l = self.lambdas[j - 1] if j > 0 else ones
            lam_r = self.lambdas[j] if j < n - 1 else ones
            w = g * lam_l[:, None, None] * lam_r[None, None, :]
            left = np.tensordot(w.conj(), w, axes=((0, 1), (0, 1)))
            dev = np.max(np.abs(left - np.diag(lam_r**2))) / float(np.max(lam_r) ** 2)
            worst = max(worst, float(dev))
            right = np.tensordot(w, w.conj(), axes=((1, 2), (1, 2)))
            dev = np.max(np.abs(right - np.diag(lam_l**2))) / float(np.max(lam_l) ** 2)
            worst = max(worst, float(dev))
        return worst

    def validate(self, tol_norm: float = 1e-10, tol_iso: float = 1e-8) -> None:
        """Check bond-vector normalization and isometry conditions."""
        for j, lam in enumerate(self.lambdas):
            total = float(np.sum(lam**2))
            if abs(total - 1.0) > tol_norm:
                raise NumericalError(f"bond {j} squared weights sum to {total}, not 1")
        defect = self.canonical_defect()
        if defect > tol_iso:
            raise NumericalError(f"canonical defect {defect:.2e} exceeds {tol_iso:.0e}")

    # ---------------------------------------------------------------- #
    # operations
    # ---------------------------------------------------------------- #

    def apply_two_qubit_gate(self, site: int, gate, policy: TruncationPolicy,
                             return_weight: bool = False):
        """Apply a 4x4 unitary to qubits (site, site+1) and re-truncate.

        The state is renormalized after truncation. With ``return_weight``
        the discarded squared Schmidt weight is returned alongside.
        """
        n = self.n_qubits
        if not 0 <= site < n - 1:
            raise NonAdjacentGateError(
                f"two-qubit gate needs sites ({site}, {site + 1}) inside 0..{n - 1}"
            )
        mat = np.asarray(gate, dtype=np.complex128)
        _check_unitary(mat, 4)
        ones = np.ones(1)
        lam_l = self.lambdas[site - 1] if site > 0 else ones
        lam_m = self.lambdas[site]
        lam_r = self.lambdas[site + 1] if site + 1 < n - 1 else ones
        g1, lam_new, g2, weight = _canonical.two_site_update(
            lam_l, self.gammas[site].data, lam_m, self.gammas[site + 1].data, lam_r,
            mat.reshape(2, 2, 2, 2), policy, normalize=True,
        )
        gammas = list(self.gammas)
        gammas[site] = DenseTensor(g1)
        gammas[site + 1] = DenseTensor(g2)
        lambdas = list(self.lambdas)
        lambdas[site] = lam_new
        out = CanonicalMps(tuple(gammas), tuple(lambdas))
        return (out, weight) if return_weight else out

    def amplitude(self, bits) -> complex:
        """Amplitude of one computational basis state; cost O(n * rank^2)."""
        vals = _parse_bits(bits, self.n_qubits)
        v = self.gammas[0].data[0, vals[0], :]
        for j in range(1, self.n_qubits):
            v = (v * self.lambdas[j - 1]) @ self.gammas[j].data[:, vals[j], :]
        return complex(v[0])

    def to_dense(self) -> DenseTensor:
        """Dense amplitude vector (guarded by the dense-size limit)."""
        limit = _dense_limit(DENSE_STATE_LIMIT)
        if self.n_qubits > limit:
            raise ResourceLimitError(
                f"{self.n_qubits} qubits exceeds the dense limit of {limit}"
            )
        vec = _canonical.vector_from_vidal(
            [g.data for g in self.gammas], list(self.lambdas)
        )
        return DenseTensor(vec)


# ---------------------------------------------------------------- #
# serialization: binary container + JSON sidecar
# ---------------------------------------------------------------- #

def save_mps(state: CanonicalMps, path: str | Path, policy: TruncationPolicy | None = None) -> None:
    """Write the chain to ``path`` and a JSON summary to ``path + '.json'``."""
    path = Path(path)
    n = state.n_qubits
    with open(path, "wb") as f:
        f.write(MPS_MAGIC)
        f.write(np.uint32(MPS_FORMAT_VERSION).tobytes())
        f.write(np.uint32(n).tobytes())
        for g in state.gammas:
            write_tensor_to(f, g)
        for lam in state.lambdas:
            write_tensor_to(f, DenseTensor(lam.astype(np.complex128)))
    sidecar = {
        "format": "qftmpo-mps/1",
        "n_qubits": n,
        "bond_ranks": list(state.bond_ranks),
        "policy": None if policy is None else {
            "rel_cutoff": policy.rel_cutoff, "max_rank": policy.max_rank,
        },
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_mps(path: str | Path) -> CanonicalMps:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MPS_MAGIC:
            raise ValueError(f"bad container magic {magic!r}, expected {MPS_MAGIC!r}")
        version = int(np.frombuffer(f.read(4), dtype=np.uint32)[0])
        if version != MPS_FORMAT_VERSION:
            raise ValueError(f"unsupported container version {version}")
        n = int(np.frombuffer(f.read(4), dtype=np.uint32)[0])
        gammas = tuple(read_tensor_from(f) for _ in range(n))
        lambdas = tuple(read_tensor_from(f).data.real.copy() for _ in range(n - 1))
    return CanonicalMps(gammas, lambdas)
