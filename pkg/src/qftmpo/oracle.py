"""Dense reference implementations used to validate the tensor-network code.

Everything here materializes full state vectors or matrices, so sizes are
capped (override with QFTMPO_DENSE_LIMIT). Phases are reduced with exact
integer arithmetic before exponentiation so reference values stay accurate
to machine precision at every supported size.
"""

from __future__ import annotations

import functools
import math
import os

import numpy as np

from .errors import ResourceLimitError
from .tensor import DenseTensor, _svd_matrix

DENSE_ORACLE_LIMIT = 14
PERIODIC_ORACLE_LIMIT = 24


def _limit(default: int) -> int:
    value = os.environ.get("QFTMPO_DENSE_LIMIT")
    if value is None:
        return default
    return int(value)


def _check_qubits(n: int, default_cap: int, what: str) -> None:
    if n < 1:
        raise ValueError(f"need at least one qubit, got {n}")
    cap = _limit(default_cap)
    if n > cap:
        raise ResourceLimitError(
            f"{what} materializes 2^{n} entries; cap is {cap} qubits "
            f"(QFTMPO_DENSE_LIMIT overrides)"
        )


def bit_reversal_permutation(n: int) -> np.ndarray:
    """Index permutation that reverses the n-bit binary expansion."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rev = np.zeros(2**n, dtype=np.int64)
    for bit in range(n):
        rev |= ((np.arange(2**n, dtype=np.int64) >> bit) & 1) << (n - 1 - bit)
    return rev


@functools.lru_cache(maxsize=8)
def _qft_matrix_cached(n: int, ordering: str) -> DenseTensor:
    size = 2**n
    out = np.empty((size, size), dtype=np.complex128)
    cols = np.arange(size, dtype=np.int64)
    step = 512
    for start in range(0, size, step):
        rows = np.arange(start, min(start + step, size), dtype=np.int64)
        # exact residue keeps the phase argument small at any size
        phase = (rows[:, None] * cols[None, :]) % size
        out[start : start + len(rows)] = np.exp((2j * np.pi / size) * phase)
    out /= math.sqrt(size)
    if ordering == "bit-reversed-input":
        out = out[:, bit_reversal_permutation(n)]
    return DenseTensor(out)


def dense_qft_matrix(n: int, ordering: str = "natural") -> DenseTensor:
    """Fourier matrix F[j, k] = exp(2*pi*i*j*k / 2^n) / 2^(n/2).

    ordering "bit-reversed-input" permutes the columns by bit reversal,
    matching an operator whose input register is bit-reversed (the compiled
    nearest-neighbour circuit).
    """
    if ordering not in ("natural", "bit-reversed-input"):
        raise ValueError(f"unknown ordering {ordering!r}")
    _check_qubits(n, DENSE_ORACLE_LIMIT, "dense_qft_matrix")
    return _qft_matrix_cached(n, ordering)


def dense_operator_schmidt(matrix, cut: int) -> np.ndarray:
    """Singular values of an operator split at ``cut`` qubits from the left.

    The row/column indices are regrouped so left in/out legs form the rows;
    the returned values are the operator Schmidt coefficients across that
    cut (descending, unnormalized).
    """
    mat = np.asarray(matrix.data if isinstance(matrix, DenseTensor) else matrix)
    size = mat.shape[0]
    if mat.shape != (size, size) or size & (size - 1):
        raise ValueError(f"expected a square power-of-two matrix, got {mat.shape}")
    n = size.bit_length() - 1
    if not 1 <= cut < n:
        raise ValueError(f"cut must lie in [1, {n - 1}], got {cut}")
    left, right = 2**cut, 2 ** (n - cut)
    work = mat.reshape(left, right, left, right).transpose(0, 2, 1, 3)
    work = work.reshape(left * left, right * right)
    _, s, _ = _svd_matrix(work)
    return s


def _apply_gate_dense(arr: np.ndarray, mat: np.ndarray, sites: tuple[int, ...]) -> np.ndarray:
    """Apply a 2x2 or 4x4 gate to the given qubit axes of ``arr``.

    ``arr`` may carry extra trailing axes (a matrix being evolved); only the
    leading qubit axes are addressed.
    """
    if len(sites) == 1:
        out = np.tensordot(mat, arr, axes=(1, sites[0]))
        return np.moveaxis(out, 0, sites[0])
    g = mat.reshape(2, 2, 2, 2)
    out = np.tensordot(g, arr, axes=((2, 3), sites))
    return np.moveaxis(out, (0, 1), sites)


def _evolve_axes(arr: np.ndarray, circuit) -> np.ndarray:
    """Shared gate loop: side="both" gates contribute their adjoint as a
    pre-multiplication (applied in reverse encounter order), then every
    gate's left factor applies in circuit order."""
    for gate in reversed([g for g in circuit.gates if g.side == "both"]):
        arr = _apply_gate_dense(arr, gate.dense_matrix().conj().T, gate.sites)
    for gate in circuit.gates:
        arr = _apply_gate_dense(arr, gate.dense_matrix(), gate.sites)
    return arr


def dense_evolve(vector, circuit) -> DenseTensor:
    """Evolve a dense state vector under a circuit.

    side="output" gates multiply in circuit order. side="both" gates are
    conjugations O -> G O G^dag, so the compiled operator picks up their
    adjoints on the input side; evolving a vector therefore pre-applies
    those adjoints (in reverse order) before the left factors. Applying a
    nearest-neighbour transform this way reproduces its compiled operator
    acting on the vector.
    """
    vec = np.asarray(vector.data if isinstance(vector, DenseTensor) else vector)
    vec = vec.reshape(-1).astype(np.complex128)
    size = vec.shape[0]
    if size & (size - 1) or size < 2:
        raise ValueError(f"state length must be a power of two >= 2, got {size}")
    n = size.bit_length() - 1
    if n != circuit.n_qubits:
        raise ValueError(f"state has {n} qubits but circuit has {circuit.n_qubits}")
    _check_qubits(n, DENSE_ORACLE_LIMIT, "dense_evolve")
    arr = _evolve_axes(vec.reshape((2,) * n), circuit)
    return DenseTensor(arr.reshape(size))


def dense_circuit_matrix(circuit) -> DenseTensor:
    """Full matrix of a circuit, including both-sides conjugation effects."""
    n = circuit.n_qubits
    _check_qubits(n, DENSE_ORACLE_LIMIT, "dense_circuit_matrix")
    size = 2**n
    arr = np.eye(size, dtype=np.complex128).reshape((2,) * n + (size,))
    arr = _evolve_axes(arr, circuit)
    return DenseTensor(arr.reshape(size, size))


# ---------------------------------------------------------------- #
# periodic-state references
# ---------------------------------------------------------------- #

def periodic_support_count(n_qubits: int, period: int, offset: int = 0) -> int:
    """Number of basis states x < 2^n with x = offset (mod period)."""
    if period < 1:
        raise ValueError(f"period must be >= 1, got {period}")
    if not 0 <= offset < period:
        raise ValueError(f"offset must lie in [0, {period}), got {offset}")
    return (2**n_qubits - 1 - offset) // period + 1


def periodic_peak_locations(n_qubits: int, period: int) -> np.ndarray:
    """Output indices nearest i * 2^n / period for i = 0..period-1.

    Rounding is exact integer arithmetic; half-way cases round down.
    """
    if period < 1:
        raise ValueError(f"period must be >= 1, got {period}")
    size = 2**n_qubits
    locs = np.empty(period, dtype=np.int64)
    for i in range(period):
        q, rem = divmod(i * size, period)
        locs[i] = q + (1 if 2 * rem > period else 0)
    return locs


def periodic_peak_probabilities(n_qubits: int, period: int, offset: int = 0) -> dict[int, float]:
    """Exact output probabilities at the peak locations after a Fourier
    transform of the uniform periodic state.

    Amplitudes are summed directly over the support with integer phase
    reduction, so the values are reliable references down to 1e-15.
    """
    _check_qubits(n_qubits, PERIODIC_ORACLE_LIMIT, "periodic_peak_probabilities")
    if period >= 2**n_qubits:
        raise ValueError(f"period {period} needs at least one support point below 2^{n_qubits}")
    count = periodic_support_count(n_qubits, period, offset)
    size = 2**n_qubits
    norm = math.sqrt(count * size)
    probs: dict[int, float] = {}
    chunk = 1 << 20
    for m in periodic_peak_locations(n_qubits, period):
        total = 0.0 + 0.0j
        for start in range(0, count, chunk):
            idx = np.arange(start, min(start + chunk, count), dtype=np.int64)
            x = offset + idx * period
            phase = (int(m) * x) % size
            total += np.exp((2j * np.pi / size) * phase).sum()
        probs[int(m)] = abs(total / norm) ** 2
    return probs


def periodic_output_distribution(n_qubits: int, period: int, offset: int = 0) -> np.ndarray:
    """Full output distribution of the transformed periodic state, via FFT.

    Independent cross-check for `periodic_peak_probabilities`; costs a dense
    2^n vector.
    """
    _check_qubits(n_qubits, PERIODIC_ORACLE_LIMIT, "periodic_output_distribution")
    if period >= 2**n_qubits:
        raise ValueError(f"period {period} needs at least one support point below 2^{n_qubits}")
    size = 2**n_qubits
    count = periodic_support_count(n_qubits, period, offset)
    psi = np.zeros(size, dtype=np.complex128)
    psi[offset::period] = 1.0 / math.sqrt(count)
    # ifft carries the e^{+2 pi i k x / N} convention used here
    amps = np.fft.ifft(psi) * math.sqrt(size)
    return np.abs(amps) ** 2
