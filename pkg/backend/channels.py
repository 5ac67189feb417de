# backend/channels.py
"""
Channel algebra for quantum processes

Representations of a quantum process (Kraus operator sets, chi-matrices,
Choi states) and conversions between them. All matrices are dense
complex128 numpy arrays; the chi-matrix uses the ketbra operator basis
A_{m1*s + m2} = |m2><m1| unless tagged otherwise.
"""
import itertools
import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import List, Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import DimensionError, NonPhysicalError

logger = logging.getLogger(__name__)

# Eigenvalues in [-EIG_TOL, 0] are floating-point noise and get clamped
EIG_TOL = 1e-8
TP_TOL = 1e-8

ComplexMatrix = np.ndarray

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def as_matrix(data, dim: int = None) -> ComplexMatrix:
    """Coerce input to a square complex128 matrix"""
    mat = np.array(data, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {mat.shape}")
    if dim is not None and mat.shape[0] != dim:
        raise DimensionError(f"Expected a {dim}x{dim} matrix, got {mat.shape}")
    return mat


def vec(op: ComplexMatrix) -> np.ndarray:
    """Coefficients of op over the ketbra basis (column stacking)"""
    return np.asarray(op).flatten(order="F")


def unvec(v: np.ndarray, dim: int) -> ComplexMatrix:
    return np.asarray(v).reshape((dim, dim), order="F")


def hermitian_eigh(mat: ComplexMatrix, what: str = "matrix") -> Tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian PSD matrix with noise clamping.

    Raises NonPhysicalError if the smallest eigenvalue is below -EIG_TOL.
    """
    herm = 0.5 * (mat + mat.conj().T)
    if not np.allclose(herm, mat, atol=EIG_TOL):
        raise NonPhysicalError(f"{what} is not Hermitian")
    evals, evecs = linalg.eigh(herm)
    if evals[0] < -EIG_TOL:
        raise NonPhysicalError(f"{what} has negative eigenvalue {evals[0]:.3e}")
    return np.clip(evals, 0.0, None), evecs


def psd_sqrt(mat: ComplexMatrix, what: str = "matrix") -> ComplexMatrix:
    """Square root; eigenvalues at rounding level (below 1e-14 * max) are treated as zero"""
    evals, evecs = hermitian_eigh(mat, what)
    evals = np.where(evals > 1e-14 * max(evals[-1], 1.0), evals, 0.0)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Quantum state of a dim-dimensional system"""

    matrix: ComplexMatrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, ket: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(ket, dtype=complex).reshape(-1, 1)
        psi = psi / np.linalg.norm(psi)
        return cls(psi @ psi.conj().T)

    def validate(self, tol: float = EIG_TOL) -> List[str]:
        issues = []
        if abs(np.trace(self.matrix) - 1) > tol:
            issues.append(f"trace is {np.trace(self.matrix).real:.6g}, expected 1")
        try:
            hermitian_eigh(self.matrix, "density matrix")
        except NonPhysicalError as e:
            issues.append(str(e))
        return issues


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Quantum channel in operator-sum form"""

    operators: Tuple[ComplexMatrix, ...]
    trace_preserving: bool = True

    def __post_init__(self):
        ops = tuple(as_matrix(op) for op in self.operators)
        if not ops:
            raise DimensionError("KrausSet needs at least one operator")
        dims = {op.shape[0] for op in ops}
        if len(dims) != 1:
            raise DimensionError(f"Kraus operators of mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def rank(self) -> int:
        return len(self.operators)

    def completeness(self) -> ComplexMatrix:
        return sum(op.conj().T @ op for op in self.operators)

    def tp_residual(self) -> float:
        """Frobenius distance of sum E_k^dag E_k from the identity"""
        return float(np.linalg.norm(self.completeness() - np.eye(self.dim)))

    def is_unitary(self) -> bool:
        return self.rank == 1 and self.trace_preserving

    def adjoint_apply(self, effect: ComplexMatrix) -> ComplexMatrix:
        """Heisenberg-picture action sum E_k^dag L E_k"""
        return sum(op.conj().T @ effect @ op for op in self.operators)


@dataclass(frozen=True, eq=False)
class ProcessChi:
    """Chi-matrix of a process on dimension dim (shape dim^2 x dim^2, trace dim)"""

    matrix: ComplexMatrix
    basis_tag: str = "ketbra"
    dim: int = field(init=False)

    def __post_init__(self):
        mat = as_matrix(self.matrix)
        dim = int(round(np.sqrt(mat.shape[0])))
        if dim * dim != mat.shape[0]:
            raise DimensionError(f"chi-matrix size {mat.shape[0]} is not a square number")
        if self.basis_tag not in ("ketbra", "pauli"):
            raise ValueError(f"Unknown basis tag: {self.basis_tag}")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dim", dim)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def validate(self, tol: float = EIG_TOL) -> List[str]:
        issues = []
        if abs(self.trace - self.dim) > max(tol, 1e-6):
            issues.append(f"trace is {self.trace:.6g}, expected {self.dim}")
        try:
            hermitian_eigh(self.matrix, "chi-matrix")
        except NonPhysicalError as e:
            issues.append(str(e))
        return issues

    def scaled(self, factor: float) -> "ProcessChi":
        return ProcessChi(self.matrix * factor, self.basis_tag)


def apply_channel(k: KrausSet, rho: DensityMatrix) -> DensityMatrix:
    """Operator-sum action sum_k E_k rho E_k^dag"""
    if k.dim != rho.dim:
        raise DimensionError(f"Channel dimension {k.dim} does not match state dimension {rho.dim}")
    out = sum(op @ rho.matrix @ op.conj().T for op in k.operators)
    return DensityMatrix(out)


def apply_to_matrix(k: KrausSet, mat: ComplexMatrix) -> ComplexMatrix:
    """Operator-sum action on an arbitrary matrix (no state validation)"""
    if k.dim != mat.shape[0]:
        raise DimensionError(f"Channel dimension {k.dim} does not match operand {mat.shape}")
    return sum(op @ mat @ op.conj().T for op in k.operators)


def kraus_to_chi(k: KrausSet) -> ProcessChi:
    """chi = e e^dag with e the (s^2 x r) matrix of ketbra coefficients"""
    e = np.column_stack([vec(op) for op in k.operators])
    return ProcessChi(e @ e.conj().T)


def chi_to_kraus(chi: ProcessChi, rank: int) -> KrausSet:
    """Kraus operators from the `rank` largest eigenpairs of chi.

    Eigenvector phases are arbitrary; every downstream use is phase-invariant.
    """
    if chi.basis_tag != "ketbra":
        raise ValueError("chi_to_kraus needs a ketbra-basis chi-matrix")
    size = chi.dim ** 2
    if not 1 <= rank <= size:
        raise ValueError(f"rank must lie in [1, {size}], got {rank}")
    evals, evecs = hermitian_eigh(chi.matrix, "chi-matrix")
    order = np.argsort(evals)[::-1][:rank]
    discarded = float(evals.sum() - evals[order].sum())
    if discarded > EIG_TOL:
        logger.debug(f"chi_to_kraus: discarded eigenvalue mass {discarded:.3e}")
    ops = [np.sqrt(evals[idx]) * unvec(evecs[:, idx], chi.dim) for idx in order]
    residual = np.linalg.norm(partial_trace_b(chi) - np.eye(chi.dim))
    return KrausSet(tuple(ops), trace_preserving=bool(residual < TP_TOL and discarded < TP_TOL))


def numerical_rank(chi: ProcessChi, tol: float = 1e-10) -> int:
    evals = chi.eigenvalues()
    return max(1, int(np.sum(evals > tol * max(1.0, evals[-1]))))


def canonical_kraus(k: KrausSet, tol: float = 1e-12) -> KrausSet:
    """Minimal Kraus set with the same action, built through chi"""
    chi = kraus_to_chi(k)
    reduced = chi_to_kraus(chi, numerical_rank(chi, tol))
    return KrausSet(reduced.operators, trace_preserving=k.trace_preserving)


def choi_state(chi: ProcessChi) -> DensityMatrix:
    return DensityMatrix(chi.matrix / chi.dim)


def partial_trace_b(chi: ProcessChi) -> ComplexMatrix:
    """sum_m (I_s x <m|) chi (I_s x |m>); the identity iff the channel is trace-preserving"""
    s = chi.dim
    return np.einsum("ikjk->ij", chi.matrix.reshape(s, s, s, s))


def is_trace_preserving(chi: ProcessChi, tol: float = TP_TOL) -> bool:
    return bool(np.linalg.norm(partial_trace_b(chi) - np.eye(chi.dim)) < tol)


def process_fidelity(a: ProcessChi, b: ProcessChi) -> float:
    """Uhlmann fidelity between the Choi states chi_a/s and chi_b/s.

    Computed as the squared nuclear norm of sqrt(rho_a) sqrt(rho_b), which is
    symmetric in a and b to rounding.
    """
    if a.dim != b.dim:
        raise DimensionError(f"Cannot compare processes of dimension {a.dim} and {b.dim}")
    if a.basis_tag != b.basis_tag:
        raise ValueError("Both chi-matrices must use the same operator basis")
    root_a = psd_sqrt(a.matrix / a.dim, "first chi-matrix")
    root_b = psd_sqrt(b.matrix / b.dim, "second chi-matrix")
    fidelity = float(np.sum(linalg.svdvals(root_a @ root_b)) ** 2)
    return min(max(fidelity, 0.0), 1.0)


def tensor_channel(a: KrausSet, b: KrausSet) -> KrausSet:
    ops = tuple(np.kron(x, y) for x, y in itertools.product(a.operators, b.operators))
    return KrausSet(ops, trace_preserving=a.trace_preserving and b.trace_preserving)


def tensor_power(k: KrausSet, n: int) -> KrausSet:
    """The same single-system channel acting locally on n subsystems"""
    return reduce(tensor_channel, [k] * n)


def compose_channels(first: KrausSet, second: KrausSet) -> KrausSet:
    """second o first, i.e. apply `first` then `second`"""
    if first.dim != second.dim:
        raise DimensionError(f"Cannot compose channels of dimension {first.dim} and {second.dim}")
    ops = tuple(s_op @ f_op for s_op, f_op in itertools.product(second.operators, first.operators))
    return KrausSet(ops, trace_preserving=first.trace_preserving and second.trace_preserving)


def identity_channel(dim: int) -> KrausSet:
    return KrausSet((np.eye(dim, dtype=complex),))


def unitary_channel(u: ComplexMatrix) -> KrausSet:
    return KrausSet((as_matrix(u),))


def pauli_labels(n_qubits: int) -> List[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]


def pauli_basis(n_qubits: int) -> List[ComplexMatrix]:
    """Normalized Pauli operators (sigma/sqrt(2) tensor products), label order IXYZ"""
    norm = np.sqrt(2.0) ** n_qubits
    return [reduce(np.kron, [PAULI[c] for c in label]) / norm for label in pauli_labels(n_qubits)]


def pauli_representation(chi: ProcessChi) -> ProcessChi:
    """Re-express a ketbra-basis chi over the normalized Pauli basis"""
    if chi.basis_tag != "ketbra":
        raise ValueError("pauli_representation expects a ketbra-basis chi-matrix")
    n_qubits = int(round(np.log2(chi.dim)))
    if 2 ** n_qubits != chi.dim:
        raise DimensionError(f"Pauli representation needs a qubit register, got dimension {chi.dim}")
    # rows are vec(P)^dag, so c = U e for every Kraus coefficient vector e
    change = np.array([vec(p).conj() for p in pauli_basis(n_qubits)])
    return ProcessChi(change @ chi.matrix @ change.conj().T, basis_tag="pauli")


def random_kraus(dim: int, rank: int, rng: np.random.Generator) -> KrausSet:
    """Random trace-preserving channel from a Haar-like isometry"""
    g = rng.normal(size=(dim * rank, dim)) + 1j * rng.normal(size=(dim * rank, dim))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return KrausSet(tuple(q[i * dim:(i + 1) * dim, :] for i in range(rank)))


def random_density_matrix(dim: int, rng: np.random.Generator) -> DensityMatrix:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho))
