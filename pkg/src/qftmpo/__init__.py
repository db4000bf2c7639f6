"""Canonical-form tensor network simulation of quantum Fourier circuits."""

from .circuits import (
    CircuitSpec,
    CompileTrace,
    GateSpec,
    RotationScheme,
    aqft_circuit,
    circuit_fingerprint,
    circuit_from_json,
    circuit_to_json,
    compile_to_mpo,
    compile_trace,
    generalized_circuit,
    nearest_neighbor_qft_circuit,
    qft_circuit,
)
from .analysis import (
    StudyResult,
    aqft_rank_study,
    hs_error_study,
    loglinear_slope,
    middle_bond,
    middle_tensor_difference,
    ordering_study,
    periodic_study,
    rotation_scheme_study,
    scaling_benchmark,
    spectrum_convergence_study,
    spectrum_study,
    spectrum_tail_slope,
    tensor_convergence_study,
)
from .errors import (
    BondRankCeilingError,
    DimensionMismatchError,
    NonAdjacentGateError,
    NumericalError,
    QftmpoError,
    ResourceLimitError,
)
from .mpo import CanonicalMpo, from_dense_operator, hs_inner, identity_mpo, load_mpo, save_mpo
from .mps import CanonicalMps, load_mps, save_mps
from .tensor import (
    DenseTensor,
    SvdResult,
    TruncationPolicy,
    contract,
    read_tensor,
    svd_truncated,
    write_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "BondRankCeilingError",
    "CanonicalMpo",
    "CanonicalMps",
    "CircuitSpec",
    "CompileTrace",
    "DenseTensor",
    "DimensionMismatchError",
    "GateSpec",
    "NonAdjacentGateError",
    "NumericalError",
    "QftmpoError",
    "ResourceLimitError",
    "RotationScheme",
    "StudyResult",
    "SvdResult",
    "TruncationPolicy",
    "aqft_circuit",
    "aqft_rank_study",
    "circuit_fingerprint",
    "circuit_from_json",
    "circuit_to_json",
    "compile_to_mpo",
    "compile_trace",
    "contract",
    "from_dense_operator",
    "generalized_circuit",
    "hs_error_study",
    "hs_inner",
    "identity_mpo",
    "load_mpo",
    "load_mps",
    "loglinear_slope",
    "middle_bond",
    "middle_tensor_difference",
    "nearest_neighbor_qft_circuit",
    "ordering_study",
    "periodic_study",
    "qft_circuit",
    "read_tensor",
    "rotation_scheme_study",
    "save_mpo",
    "save_mps",
    "scaling_benchmark",
    "spectrum_convergence_study",
    "spectrum_study",
    "spectrum_tail_slope",
    "svd_truncated",
    "tensor_convergence_study",
    "write_tensor",
]
