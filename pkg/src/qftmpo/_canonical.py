"""Canonical-form sweeps shared by state (d=2) and operator (d=4) chains.

A "train" here is a list of rank-3 arrays with legs (left bond, physical,
right bond); the matrix-chain product over the bond legs reproduces the
encoded vector. Canonical form splits a train into isometric site tensors
(gammas) plus one non-negative vector per bond whose entries are the
Schmidt coefficients of the encoded vector across that bond. For a
normalized chain each bond vector has unit 2-norm; otherwise every bond
vector carries the full 2-norm of the vector, which is the convention used
for operator chains.

Singular values below NOISE_FLOOR relative to the bond maximum are pure
double-precision noise and are always dropped, independent of the caller's
truncation policy.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError
from .tensor import TruncationPolicy, _svd_matrix, retained_count

NOISE_FLOOR = 1e-14


def _split_bond(mat, policy, floor):
    """SVD a bond matrix and truncate. Returns (u, kept s, vh, dropped weight)."""
    u, s, vh = _svd_matrix(mat)
    k = retained_count(s, policy, extra_cutoff=floor)
    if k == 0 or s[0] == 0.0:
        raise NumericalError("bond spectrum vanished; chain encodes the zero vector")
    discarded = float(np.sum(s[k:] ** 2))
    return u[:, :k], s[:k], vh[:k], discarded


def canonicalize_train(tensors, policy, *, normalize, floor=NOISE_FLOOR):
    """Bring a raw train into canonical form.

    Left-to-right QR sweep makes every site left-isometric, pushing the
    norm to the last site; the right-to-left SVD sweep then truncates each
    bond and collects its Schmidt vector. With ``normalize`` the bond
    vectors are rescaled to unit 2-norm and the encoded vector to norm 1.

    Returns (gammas, bond_vectors, discarded_weight).
    """
    n = len(tensors)
    work = [np.asarray(t, dtype=np.complex128) for t in tensors]
    if n == 1:
        g = work[0]
        if normalize:
            norm = np.linalg.norm(g)
            if norm == 0.0:
                raise NumericalError("chain encodes the zero vector")
            g = g / norm
        return [g], [], 0.0

    for j in range(n - 1):  # left-to-right: orthonormalize columns
        chi_l, d, chi_r = work[j].shape
        q, rmat = np.linalg.qr(work[j].reshape(chi_l * d, chi_r))
        work[j] = q.reshape(chi_l, d, -1)
        work[j + 1] = np.tensordot(rmat, work[j + 1], axes=(1, 0))

    bond_vectors = [None] * (n - 1)
    discarded = 0.0
    for j in range(n - 1, 0, -1):  # right-to-left: truncate bonds
        chi_l, d, chi_r = work[j].shape
        u, s, vh, dropped = _split_bond(work[j].reshape(chi_l, d * chi_r), policy, floor)
        discarded += dropped
        bond_vectors[j - 1] = s
        work[j] = vh.reshape(-1, d, chi_r)
        work[j - 1] = np.tensordot(work[j - 1], u * s, axes=(2, 0))

    # work[0] now carries the full norm; work[1:] are right-isometric with
    # bond_vectors holding the raw Schmidt coefficients.
    stored = bond_vectors
    if normalize:
        norm = float(np.linalg.norm(bond_vectors[0]))
        work[0] = work[0] / norm
        stored = [lam / np.linalg.norm(lam) for lam in bond_vectors]

    gammas = [None] * n
    gammas[0] = work[0] / stored[0][None, None, :]
    for j in range(1, n - 1):
        gammas[j] = work[j] / stored[j][None, None, :]
    gammas[n - 1] = work[n - 1]
    return gammas, stored, discarded


def vidal_from_vector(vec, n_sites, phys_dim, policy, *, normalize, floor=NOISE_FLOOR):
    """Canonical form of a dense vector over ``n_sites`` sites.

    A straight left-to-right SVD cascade: at each bond the left block is
    already an isometry, so the singular values are the exact Schmidt
    coefficients of the remaining vector.
    """
    vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
    if len(vec) != phys_dim**n_sites:
        raise ValueError(
            f"vector of length {len(vec)} does not factor into {n_sites} sites of dim {phys_dim}"
        )
    if n_sites == 1:
        g = vec.reshape(1, phys_dim, 1)
        if normalize:
            norm = np.linalg.norm(g)
            if norm == 0.0:
                raise NumericalError("zero vector")
            g = g / norm
        return [g], [], 0.0

    gammas = []
    bond_vectors = []
    discarded = 0.0
    rem = vec.reshape(1, -1)
    prev = np.ones(1)
    for _ in range(n_sites - 1):
        chi = rem.shape[0]
        u, s, vh, dropped = _split_bond(rem.reshape(chi * phys_dim, -1), policy, floor)
        discarded += dropped
        lam = s / np.linalg.norm(s) if normalize else s
        gammas.append(u.reshape(chi, phys_dim, -1) / prev[:, None, None])
        bond_vectors.append(lam)
        rem = lam[:, None] * vh
        prev = lam
    gammas.append((rem / prev[:, None]).reshape(-1, phys_dim, 1))
    return gammas, bond_vectors, discarded


def train_from_vidal(gammas, bond_vectors):
    """Raw train equivalent to canonical data: fold each bond vector into
    the site on its left. The last site is taken as is."""
    n = len(gammas)
    out = []
    for j in range(n - 1):
        out.append(np.asarray(gammas[j]) * np.asarray(bond_vectors[j])[None, None, :])
    out.append(np.asarray(gammas[n - 1]))
    return out


def vector_from_vidal(gammas, bond_vectors):
    """Contract a canonical chain back into a dense vector (exponential)."""
    n = len(gammas)
    acc = np.asarray(gammas[0])[0]  # (d, chi)
    for j in range(1, n):
        acc = acc * np.asarray(bond_vectors[j - 1])[None, :]
        acc = np.tensordot(acc, np.asarray(gammas[j]), axes=(1, 0))  # (D, d, chi)
        acc = acc.reshape(acc.shape[0] * acc.shape[1], acc.shape[2])
    return acc[:, 0]


def two_site_update(lam_left, g_left, lam_mid, g_right, lam_right, pair_op, policy,
                    *, normalize, floor=NOISE_FLOOR):
    """Apply a two-site operator and restore the shared bond by one SVD.

    ``pair_op`` has legs (new1, new2, old1, old2) over the train's physical
    dimension. Neighbouring bond vectors are folded in before the SVD, so
    the new bond vector holds the updated Schmidt coefficients directly.

    Returns (g_left', bond', g_right', discarded_weight).
    """
    a, d, _ = g_left.shape
    c = g_right.shape[2]
    theta = g_left * lam_left[:, None, None]
    theta = theta * lam_mid[None, None, :]
    theta = np.tensordot(theta, g_right * lam_right[None, None, :], axes=(2, 0))  # a p q c
    theta = np.einsum("xypq,apqc->axyc", pair_op, theta, optimize=True)
    u, s, vh, discarded = _split_bond(theta.reshape(a * d, d * c), policy, floor)
    lam_new = s / np.linalg.norm(s) if normalize else s
    g_left_new = u.reshape(a, d, -1) / lam_left[:, None, None]
    g_right_new = vh.reshape(-1, d, c) / lam_right[None, None, :]
    return g_left_new, lam_new, g_right_new, discarded
