"""Matrix product operators on qubit chains, stored in canonical form.

Storage convention: per-site tensors with legs (left bond, output physical,
input physical, right bond) plus one non-negative vector per bond. The bond
vectors are kept unnormalized: across every bond their squared sum equals
the squared Frobenius norm of the encoded operator, i.e. 2^n for an
untruncated n-qubit unitary. Dividing the squared bond entries by 2^n
therefore gives the probability weights of the operator-Schmidt
decomposition across that bond.

Internally an operator chain is just a state chain with physical dimension
4 (output and input legs fused, output slower), so all canonical-form
machinery is shared with `CanonicalMps`.
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
    ResourceLimitError,
)
from .mps import CanonicalMps, _check_unitary, _dense_limit
from .tensor import DenseTensor, TruncationPolicy, read_tensor_from, write_tensor_to

MPO_MAGIC = b"MPOC"
MPO_FORMAT_VERSION = 1
DENSE_OPERATOR_LIMIT = 12  # qubits; override with QFTMPO_DENSE_LIMIT


def _fused(site: np.ndarray) -> np.ndarray:
    """(l, 2, 2, r) -> (l, 4, r) with output leg slower."""
    shp = site.shape
    return site.reshape(shp[0], 4, shp[3])


def _unfused(site: np.ndarray) -> np.ndarray:
    shp = site.shape
    return site.reshape(shp[0], 2, 2, shp[2])


def pair_operator(gate: np.ndarray, side: str) -> np.ndarray:
    """Lift a two-qubit gate to the fused (output, input) legs of two sites.

    side="output" multiplies the gate onto the output legs only;
    side="both" also conjugates the input legs with the same gate, which is
    how bookkeeping swaps track the input ordering alongside the output.
    Returns legs (new1, new2, old1, old2) over the fused dimension 4.
    """
    g4 = gate.reshape(2, 2, 2, 2)
    if side == "output":
        eye = np.eye(2, dtype=np.complex128)
        p = np.einsum("aceg,bf,dh->abcdefgh", g4, eye, eye)
    elif side == "both":
        c4 = gate.conj().reshape(2, 2, 2, 2)
        p = np.einsum("aceg,bdfh->abcdefgh", g4, c4)
    else:
        raise ValueError(f"side must be 'output' or 'both', got {side!r}")
    return np.ascontiguousarray(p.reshape(4, 4, 4, 4))


def _single_site_apply(site: np.ndarray, gate: np.ndarray, side: str) -> np.ndarray:
    """One-qubit gate on a site tensor; exact, no bond is touched."""
    out = np.einsum("xi,lijr->lxjr", gate, site)
    if side == "both":
        out = np.einsum("yj,lijr->liyr", gate.conj(), out)
    elif side != "output":
        raise ValueError(f"side must be 'output' or 'both', got {side!r}")
    return out


def _absorb_pair(sites: list, gammas: list, j: int, pair_op: np.ndarray,
                 policy: TruncationPolicy) -> float:
    """In-place two-site absorption on raw arrays; returns discarded weight."""
    n = len(sites)
    ones = np.ones(1)
    lam_l = gammas[j - 1] if j > 0 else ones
    lam_m = gammas[j]
    lam_r = gammas[j + 1] if j + 1 < n - 1 else ones
    g1, lam_new, g2, weight = _canonical.two_site_update(
        lam_l, _fused(sites[j]), lam_m, _fused(sites[j + 1]), lam_r,
        pair_op, policy, normalize=False,
    )
    sites[j] = _unfused(g1)
    sites[j + 1] = _unfused(g2)
    gammas[j] = lam_new
    return weight


@dataclass(frozen=True, eq=False)
class CanonicalMpo:
    """An operator chain in canonical form with norm-carrying bond vectors."""

    site_tensors: tuple[DenseTensor, ...]
    gamma_vectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.site_tensors:
            raise ValueError("need at least one site")
        sites = tuple(
            t if isinstance(t, DenseTensor) else DenseTensor(t) for t in self.site_tensors
        )
        gammas = []
        for gam in self.gamma_vectors:
            arr = np.array(gam, dtype=np.float64, copy=True)
            arr.setflags(write=False)
            gammas.append(arr)
        gammas = tuple(gammas)
        n = len(sites)
        if len(gammas) != n - 1:
            raise DimensionMismatchError(
                f"{n} sites require {n - 1} bond vectors, got {len(gammas)}"
            )
        left = 1
        for j, t in enumerate(sites):
            if t.ndim != 4 or t.shape[1] != 2 or t.shape[2] != 2:
                raise DimensionMismatchError(f"site {j} has shape {t.shape}, want (l, 2, 2, r)")
            if t.shape[0] != left:
                raise DimensionMismatchError(
                    f"site {j} left bond {t.shape[0]} != previous right bond {left}"
                )
            if j < n - 1 and t.shape[3] != len(gammas[j]):
                raise DimensionMismatchError(
                    f"site {j} right bond {t.shape[3]} != bond vector length {len(gammas[j])}"
                )
            left = t.shape[3]
        if sites[-1].shape[3] != 1:
            raise DimensionMismatchError("right boundary bond must have dimension 1")
        for j, gam in enumerate(gammas):
            if len(gam) == 0 or np.any(gam <= 0) or np.any(np.diff(gam) > 0):
                raise ValueError(f"bond {j} vector must be positive and non-increasing")
        object.__setattr__(self, "site_tensors", sites)
        object.__setattr__(self, "gamma_vectors", gammas)

    # ---------------------------------------------------------------- #
    # structure
    # ---------------------------------------------------------------- #

    @property
    def n_qubits(self) -> int:
        return len(self.site_tensors)

    @property
    def bond_ranks(self) -> tuple[int, ...]:
        return tuple(len(gam) for gam in self.gamma_vectors)

    @property
    def max_bond_rank(self) -> int:
        return max(self.bond_ranks, default=1)

    def frobenius_norm(self) -> float:
        """Hilbert-Schmidt norm of the encoded operator."""
        if self.gamma_vectors:
            return float(np.linalg.norm(self.gamma_vectors[0]))
        return float(np.linalg.norm(self.site_tensors[0].data))

    def bond_probability_distribution(self, bond: int) -> np.ndarray:
        """Operator-Schmidt weights p_i = gamma_i^2 / 2^n across ``bond``."""
        if not 0 <= bond < len(self.gamma_vectors):
            raise ValueError(f"bond {bond} out of range for {self.n_qubits} qubits")
        gam = self.gamma_vectors[bond]
        return (gam / math.sqrt(float(2**self.n_qubits))) ** 2

    def schmidt_strength(self) -> float:
        """Max over bonds of the entropy -sum p_i log2 p_i of the
        operator-Schmidt weights. Zero for a single site."""
        best = 0.0
        for bond in range(len(self.gamma_vectors)):
            p = self.bond_probability_distribution(bond)
            p = p[p > 0]
            best = max(best, float(-np.sum(p * np.log2(p))))
        return best

    def hartley_strength(self) -> float:
        """log2 of the largest bond rank, after dropping bond entries below
        the double-precision noise floor."""
        best = 1
        for gam in self.gamma_vectors:
            best = max(best, int(np.count_nonzero(gam >= _canonical.NOISE_FLOOR * gam[0])))
        return float(math.log2(best))

    def middle_tensor(self) -> DenseTensor:
        """Site tensor at position n // 2."""
        return self.site_tensors[self.n_qubits // 2]

    def canonical_defect(self) -> float:
        """Largest violation of the canonical conditions, bond-weighted.

        The norm-carrying convention leaves the left condition meaningful on
        sites 0..n-2 and the right condition on sites 1..n-1. Conditions are
        evaluated with both bond vectors folded in (stable when the spectrum
        spans many decades) and reported relative to the largest squared
        bond weight: left means W^dag W = diag(gamma_r^2) for
        W = gamma_l * Gamma * gamma_r, right is the mirror statement.
        """
        n = self.n_qubits
        worst = 0.0
        ones = np.ones(1)
        for j in range(n):
            t = _fused(self.site_tensors[j].data)
            lam_l = self.gamma_vectors[j - 1] if j > 0 else ones
            lam_r = self.gamma_vectors[j] if j < n - 1 else ones
            w = t * lam_l[:, None, None] * lam_r[None, None, :]
            if j < n - 1:
                left = np.tensordot(w.conj(), w, axes=((0, 1), (0, 1)))
                dev = np.max(np.abs(left - np.diag(lam_r**2))) / float(np.max(lam_r) ** 2)
                worst = max(worst, float(dev))
            if j > 0:
                right = np.tensordot(w, w.conj(), axes=((1, 2), (1, 2)))
                dev = np.max(np.abs(right - np.diag(lam_l**2))) / float(np.max(lam_l) ** 2)
                worst = max(worst, float(dev))
        return worst

    def validate(self, tol_norm: float = 1e-9, tol_iso: float = 1e-8) -> None:
        """Check cross-bond norm consistency and isometry conditions."""
        if self.gamma_vectors:
            norms = [float(np.sum(g**2)) for g in self.gamma_vectors]
            ref = norms[0]
            for j, val in enumerate(norms):
                if abs(val - ref) > tol_norm * max(ref, 1.0):
                    raise DimensionMismatchError(
                        f"bond {j} squared weight {val} differs from bond 0 ({ref})"
                    )
        defect = self.canonical_defect()
        if defect > tol_iso:
            from .errors import NumericalError

            raise NumericalError(f"canonical defect {defect:.2e} exceeds {tol_iso:.0e}")

    # ---------------------------------------------------------------- #
    # operations
    # ---------------------------------------------------------------- #

    def absorb_gate(self, site: int, gate, policy: TruncationPolicy,
                    side: str = "output") -> "CanonicalMpo":
        """Multiply a 1- or 2-qubit gate onto the operator at ``site``.

        side="output" forms gate @ O; side="both" forms gate @ O @ gate^dag,
        the bookkeeping mode used for reordering swaps. Two-qubit gates act
        on (site, site+1); route long-range gates with explicit swaps.
        """
        mat = np.asarray(gate, dtype=np.complex128)
        n = self.n_qubits
        if mat.shape == (2, 2):
            if not 0 <= site < n:
                raise ValueError(f"site {site} out of range for {n} qubits")
            _check_unitary(mat, 2)
            sites = list(t.data for t in self.site_tensors)
            sites[site] = _single_site_apply(sites[site], mat, side)
            tensors = list(self.site_tensors)
            tensors[site] = DenseTensor(sites[site])
            return CanonicalMpo(tuple(tensors), self.gamma_vectors)
        if mat.shape == (4, 4):
            if not 0 <= site < n - 1:
                raise NonAdjacentGateError(
                    f"two-qubit gate needs sites ({site}, {site + 1}) inside 0..{n - 1}"
                )
            _check_unitary(mat, 4)
            sites = [t.data for t in self.site_tensors]
            gammas = [g for g in self.gamma_vectors]
            _absorb_pair(sites, gammas, site, pair_operator(mat, side), policy)
            tensors = list(self.site_tensors)
            tensors[site] = DenseTensor(sites[site])
            tensors[site + 1] = DenseTensor(sites[site + 1])
            return CanonicalMpo(tuple(tensors), tuple(gammas))
        raise DimensionMismatchError(f"gate must be 2x2 or 4x4, got shape {mat.shape}")

    def apply_to_mps(self, state: CanonicalMps, policy: TruncationPolicy) -> CanonicalMps:
        """Apply the operator to a state and recanonicalize.

        Site tensors and bond vectors multiply pointwise into a product
        chain whose bond ranks are the products of the factors' ranks; a
        two-sweep recanonicalization then restores canonical form and
        truncates per ``policy``. The result is renormalized to unit norm.
        """
        gammas, lambdas = _product_chain(self, state)
        train = _canonical.train_from_vidal(gammas, lambdas)
        new_g, new_l, _ = _canonical.canonicalize_train(train, policy, normalize=True)
        return CanonicalMps(
            tuple(DenseTensor(g) for g in new_g), tuple(new_l)
        )

    def recanonicalize(self, policy: TruncationPolicy) -> "CanonicalMpo":
        """Full left-to-right then right-to-left sweep with truncation."""
        train = _canonical.train_from_vidal(
            [_fused(t.data) for t in self.site_tensors], list(self.gamma_vectors)
        )
        new_t, new_g, _ = _canonical.canonicalize_train(train, policy, normalize=False)
        return CanonicalMpo(
            tuple(DenseTensor(_unfused(t)) for t in new_t), tuple(new_g)
        )

    def to_dense(self) -> DenseTensor:
        """Dense matrix of the operator (guarded by the dense-size limit)."""
        n = self.n_qubits
        limit = _dense_limit(DENSE_OPERATOR_LIMIT)
        if n > limit:
            raise ResourceLimitError(f"{n} qubits exceeds the dense limit of {limit}")
        vec = _canonical.vector_from_vidal(
            [_fused(t.data) for t in self.site_tensors], list(self.gamma_vectors)
        )
        arr = vec.reshape((2,) * (2 * n))  # (i_0, j_0, i_1, j_1, ...)
        perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        mat = np.transpose(arr, perm).reshape(2**n, 2**n)
        return DenseTensor(mat)


def _product_chain(op: CanonicalMpo, state: CanonicalMps):
    """Site-wise product of an operator chain and a state chain.

    Returns non-canonical (gammas, lambdas) whose bond ranks are the exact
    products of the operator and state bond ranks.
    """
    if op.n_qubits != state.n_qubits:
        raise DimensionMismatchError(
            f"operator on {op.n_qubits} qubits cannot act on {state.n_qubits}-qubit state"
        )
    n = op.n_qubits
    gammas = []
    for j in range(n):
        g = state.gammas[j].data  # (a, p, b)
        o = op.site_tensors[j].data  # (c, i, p, d)
        t = np.tensordot(g, o, axes=(1, 2))  # (a, b, c, i, d)
        t = t.transpose(0, 2, 3, 1, 4)  # (a, c, i, b, d)
        s = t.shape
        gammas.append(np.ascontiguousarray(t.reshape(s[0] * s[1], 2, s[3] * s[4])))
    lambdas = [
        np.kron(state.lambdas[j], op.gamma_vectors[j]) for j in range(n - 1)
    ]
    return gammas, lambdas


def identity_mpo(n: int) -> CanonicalMpo:
    """Identity operator; rank 1 on every bond with the full Frobenius norm
    (2^(n/2)) carried by each bond vector."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    eye = np.eye(2, dtype=np.complex128).reshape(1, 2, 2, 1)
    if n == 1:
        return CanonicalMpo((DenseTensor(eye),), ())
    root_d = math.sqrt(float(2**n))
    boundary = eye / math.sqrt(2.0)
    interior = eye / (math.sqrt(2.0) * root_d)
    sites = [boundary] + [interior] * (n - 2) + [boundary]
    gammas = [np.array([root_d])] * (n - 1)
    return CanonicalMpo(tuple(DenseTensor(t) for t in sites), tuple(gammas))


def from_dense_operator(mat, policy: TruncationPolicy = TruncationPolicy()) -> CanonicalMpo:
    """Canonical operator chain of a dense matrix (for cross-checks and
    small reference operators)."""
    arr = np.asarray(mat, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatchError(f"need a square matrix, got shape {arr.shape}")
    n = int(math.log2(arr.shape[0]))
    if 2**n != arr.shape[0]:
        raise DimensionMismatchError(f"matrix dimension {arr.shape[0]} is not a power of two")
    limit = _dense_limit(DENSE_OPERATOR_LIMIT)
    if n > limit:
        raise ResourceLimitError(f"{n} qubits exceeds the dense limit of {limit}")
    split = arr.reshape((2,) * (2 * n))  # (i_0..i_{n-1}, j_0..j_{n-1})
    perm = [ax for k in range(n) for ax in (k, n + k)]
    vec = np.transpose(split, perm).reshape(-1)
    gammas, bond_vectors, _ = _canonical.vidal_from_vector(
        vec, n, 4, policy, normalize=False
    )
    return CanonicalMpo(
        tuple(DenseTensor(_unfused(g)) for g in gammas), tuple(bond_vectors)
    )


def hs_inner(a: CanonicalMpo, b: CanonicalMpo) -> complex:
    """Normalized Hilbert-Schmidt inner product tr(A^dag B) / 2^n.

    Conjugate-linear in the first argument. Contracted bond by bond through
    transfer matrices; nothing dense is formed, so this works at any width.
    Equals 1 for A == B unitary.
    """
    if a.n_qubits != b.n_qubits:
        raise DimensionMismatchError(
            f"operand widths differ: {a.n_qubits} vs {b.n_qubits}"
        )
    ta = _canonical.train_from_vidal(
        [_fused(t.data) for t in a.site_tensors], list(a.gamma_vectors)
    )
    tb = _canonical.train_from_vidal(
        [_fused(t.data) for t in b.site_tensors], list(b.gamma_vectors)
    )
    env = np.ones((1, 1), dtype=np.complex128)
    for site_a, site_b in zip(ta, tb):
        env = np.tensordot(env, site_a.conj(), axes=(0, 0))  # (chi_b, p, r_a)
        env = np.tensordot(env, site_b, axes=((0, 1), (0, 1)))  # (r_a, r_b)
    return complex(env[0, 0]) / float(2**a.n_qubits)


# ---------------------------------------------------------------- #
# serialization: binary container + JSON sidecar
# ---------------------------------------------------------------- #

def save_mpo(op: CanonicalMpo, path: str | Path, policy: TruncationPolicy | None = None,
             circuit_fingerprint: str | None = None) -> None:
    """Write the chain to ``path`` and a JSON summary to ``path + '.json'``."""
    path = Path(path)
    n = op.n_qubits
    with open(path, "wb") as f:
        f.write(MPO_MAGIC)
        f.write(np.uint32(MPO_FORMAT_VERSION).tobytes())
        f.write(np.uint32(n).tobytes())
        for t in op.site_tensors:
            write_tensor_to(f, t)
        for gam in op.gamma_vectors:
            write_tensor_to(f, DenseTensor(gam.astype(np.complex128)))
    sidecar = {
        "format": "qftmpo-mpo/1",
        "n_qubits": n,
        "bond_ranks": list(op.bond_ranks),
        "policy": None if policy is None else {
            "rel_cutoff": policy.rel_cutoff, "max_rank": policy.max_rank,
        },
        "circuit_fingerprint": circuit_fingerprint,
        "bond_spectra": [[float(v) for v in gam] for gam in op.gamma_vectors],
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_mpo(path: str | Path) -> CanonicalMpo:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MPO_MAGIC:
            raise ValueError(f"bad container magic {magic!r}, expected {MPO_MAGIC!r}")
        version = int(np.frombuffer(f.read(4), dtype=np.uint32)[0])
        if version != MPO_FORMAT_VERSION:
            raise ValueError(f"unsupported container version {version}")
        n = int(np.frombuffer(f.read(4), dtype=np.uint32)[0])
        sites = tuple(read_tensor_from(f) for _ in range(n))
        gammas = tuple(read_tensor_from(f).data.real.copy() for _ in range(n - 1))
    return CanonicalMpo(sites, gammas)
