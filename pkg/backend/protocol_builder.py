# backend/protocol_builder.py
"""
Cube tomography protocols and their fuzzified versions

A protocol stores preparations and measurement effects separately; the
chi-matrix measurement operators (rho^(i))* x Lambda_j are derived on demand.
Ordering is preparation-major, then basis, then outcome, so count files align
with protocol rows by index.
"""
import itertools
import logging
import math
from dataclasses import dataclass, replace
from functools import reduce
from typing import Iterator, List, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd

from .channels import ComplexMatrix, DensityMatrix, KrausSet, apply_to_matrix
from .errors import DimensionError
from .measurement_record import MeasurementRecord

logger = logging.getLogger(__name__)

_R2 = 1 / math.sqrt(2)


class Rotation(NamedTuple):
    theta: float
    axis: Tuple[float, float, float]


# Six Pauli eigenstates |+>, |->, |+i>, |-i>, |0>, |1>
CUBE_KETS = (
    np.array([1, 1]) * _R2,
    np.array([1, -1]) * _R2,
    np.array([1, 1j]) * _R2,
    np.array([1, -1j]) * _R2,
    np.array([1, 0]),
    np.array([0, 1]),
)

# Rotations preparing each cube state from |0>
CUBE_ROTATIONS = (
    Rotation(math.pi, (_R2, 0.0, _R2)),
    Rotation(math.pi, (-_R2, 0.0, _R2)),
    Rotation(math.pi, (0.0, _R2, _R2)),
    Rotation(math.pi, (0.0, -_R2, _R2)),
    Rotation(0.0, (0.0, 0.0, 1.0)),
    Rotation(math.pi, (1.0, 0.0, 0.0)),
)

# x, y and z measurements reuse rotations 1, 3 and 5
BASIS_NAMES = ("x", "y", "z")
BASIS_ROTATIONS = (CUBE_ROTATIONS[0], CUBE_ROTATIONS[2], CUBE_ROTATIONS[4])


@dataclass(frozen=True, eq=False)
class PreparationSpec:
    index: int
    state: DensityMatrix
    rotations: Tuple[Rotation, ...] = ()


@dataclass(frozen=True, eq=False)
class MeasurementEffect:
    """Effect operator; `group` is the basis scheme, `outcome` the detector outcome"""

    index: int
    operator: ComplexMatrix
    group: int
    outcome: int


@dataclass(frozen=True, eq=False)
class TomographyProtocol:
    n_qubits: int
    preparations: Tuple[PreparationSpec, ...]
    effects: Tuple[MeasurementEffect, ...]
    basis_rotations: Tuple[Tuple[Rotation, ...], ...] = ()
    label: str = "standard"

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def m_p(self) -> int:
        return len(self.preparations)

    @property
    def m_m(self) -> int:
        return len(self.effects)

    @property
    def m(self) -> int:
        return self.m_p * self.m_m

    @property
    def m_b(self) -> int:
        """Number of measurement schemes (bases) per preparation"""
        return len({effect.group for effect in self.effects})

    @property
    def scheme_count(self) -> int:
        return self.m_p * self.m_b

    def prep_array(self) -> np.ndarray:
        return np.array([prep.state.matrix for prep in self.preparations])

    def effect_array(self) -> np.ndarray:
        return np.array([effect.operator for effect in self.effects])

    def group_ids(self) -> np.ndarray:
        return np.array([effect.group for effect in self.effects])

    def groups(self) -> List[np.ndarray]:
        """Effect indices of every measurement scheme, in group order"""
        ids = self.group_ids()
        return [np.flatnonzero(ids == g) for g in sorted(set(ids.tolist()))]

    def chi_operators(self) -> Iterator[ComplexMatrix]:
        """All m chi-matrix measurement operators, preparation-major"""
        for prep in self.preparations:
            for effect in self.effects:
                yield chi_measurement_operator(prep, effect)

    def with_states(self, states: Sequence[ComplexMatrix], label: str) -> "TomographyProtocol":
        preps = tuple(replace(p, state=DensityMatrix(s)) for p, s in zip(self.preparations, states))
        return replace(self, preparations=preps, label=label)

    def with_effect_operators(self, operators: Sequence[ComplexMatrix], label: str) -> "TomographyProtocol":
        effects = tuple(replace(e, operator=op) for e, op in zip(self.effects, operators))
        return replace(self, effects=effects, label=label)

    def validate(self, tol: float = 1e-10) -> List[str]:
        issues = []
        for effect in self.effects:
            evals = np.linalg.eigvalsh(effect.operator)
            if evals[0] < -tol:
                issues.append(f"effect {effect.index} has negative eigenvalue {evals[0]:.3e}")
        for prep in self.preparations:
            issues.extend(f"preparation {prep.index}: {msg}" for msg in prep.state.validate())
        return issues


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def cube_protocol(n_qubits: int) -> TomographyProtocol:
    """Six Pauli eigenstates in, three Pauli measurements out, on every qubit"""
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    projectors = [np.outer(ket, ket.conj()).astype(complex) for ket in CUBE_KETS]

    preparations = []
    for idx, combo in enumerate(itertools.product(range(6), repeat=n_qubits)):
        state = _kron_all([projectors[c] for c in combo])
        preparations.append(PreparationSpec(idx, DensityMatrix(state), tuple(CUBE_ROTATIONS[c] for c in combo)))

    effects = []
    basis_rotations = []
    s = 2 ** n_qubits
    for group, bases in enumerate(itertools.product(range(3), repeat=n_qubits)):
        basis_rotations.append(tuple(BASIS_ROTATIONS[b] for b in bases))
        for outcome, bits in enumerate(itertools.product(range(2), repeat=n_qubits)):
            op = _kron_all([projectors[2 * b + o] for b, o in zip(bases, bits)])
            effects.append(MeasurementEffect(group * s + outcome, op, group, outcome))

    logger.debug(f"Cube protocol for {n_qubits} qubit(s): m_p={len(preparations)}, m_m={len(effects)}")
    return TomographyProtocol(n_qubits, tuple(preparations), tuple(effects), tuple(basis_rotations))


def chi_measurement_operator(prep: PreparationSpec, effect: MeasurementEffect) -> ComplexMatrix:
    """(rho^(i))* x Lambda_j"""
    if prep.state.dim != effect.operator.shape[0]:
        raise DimensionError(
            f"Preparation dimension {prep.state.dim} does not match effect dimension {effect.operator.shape[0]}"
        )
    return np.kron(prep.state.matrix.conj(), effect.operator)


def _check_noise(p: TomographyProtocol, noise: KrausSet):
    if noise.dim != p.dim:
        raise DimensionError(f"Noise channel dimension {noise.dim} does not match protocol dimension {p.dim}")


def fuzzify_gn(p: TomographyProtocol, noise: KrausSet) -> TomographyProtocol:
    """Gate-noise model: effects become sum E_k^dag Lambda E_k, preparations untouched"""
    _check_noise(p, noise)
    return p.with_effect_operators([noise.adjoint_apply(e.operator) for e in p.effects], label="gn")


def fuzzify_ng(p: TomographyProtocol, noise: KrausSet) -> TomographyProtocol:
    """Noise-gate model: preparations become sum E_k rho E_k^dag, effects untouched"""
    _check_noise(p, noise)
    return p.with_states([apply_to_matrix(noise, prep.state.matrix) for prep in p.preparations], label="ng")


def fuzzify_ngn(p: TomographyProtocol, prep_noise: KrausSet, meas_noise: KrausSet) -> TomographyProtocol:
    return replace(fuzzify_gn(fuzzify_ng(p, prep_noise), meas_noise), label="ngn")


def computational_projectors(dim: int) -> List[np.ndarray]:
    eye = np.eye(dim, dtype=complex)
    return [np.outer(eye[k], eye[k]) for k in range(dim)]


def fuzzify_ippm(p: TomographyProtocol, init: KrausSet, prep_gates: Sequence[KrausSet],
                 basis_gates: Sequence[KrausSet], meas: KrausSet) -> TomographyProtocol:
    """Imperfect preparation and projective measurement model.

    Preparations are prep_gate(init(|0..0><0..0|)); effect (l, k) is the
    fixed projector Pi_k pulled back through the measurement noise and the
    l-th basis change.
    """
    if len(prep_gates) != p.m_p:
        raise DimensionError(f"Expected {p.m_p} preparation gates, got {len(prep_gates)}")
    if len(basis_gates) != p.m_b:
        raise DimensionError(f"Expected {p.m_b} basis gates, got {len(basis_gates)}")
    for channel in [init, meas, *prep_gates, *basis_gates]:
        _check_noise(p, channel)

    ground = np.zeros((p.dim, p.dim), dtype=complex)
    ground[0, 0] = 1.0
    initialized = apply_to_matrix(init, ground)
    states = [apply_to_matrix(gate, initialized) for gate in prep_gates]

    detector = [meas.adjoint_apply(pi) for pi in computational_projectors(p.dim)]
    operators = [basis_gates[e.group].adjoint_apply(detector[e.outcome]) for e in p.effects]

    return p.with_states(states, "ippm").with_effect_operators(operators, "ippm")


def normalization_projectors(n_qubits: int) -> np.ndarray:
    """Informationally complete projector set on subsystem A (cube states)"""
    return cube_protocol(n_qubits).prep_array()


def normalization_complement(p: TomographyProtocol, t_phi: float) -> MeasurementRecord:
    """Fictitious rows (Pi_phi x I_s, t_phi, k_phi = t_phi) pinning Tr_B(chi) = I_s"""
    count = len(normalization_projectors(p.n_qubits))
    df_rows = {
        "prep_index": np.arange(count),
        "effect_index": np.full(count, -1),
        "t": np.full(count, float(t_phi)),
        "k": np.full(count, float(t_phi)),
        "fictitious": np.ones(count, dtype=bool),
    }
    return MeasurementRecord(pd.DataFrame(df_rows))


def unity_decomposition_residual(p: TomographyProtocol) -> float:
    """Relative distance of sum_{i,j} Lambda_j^(i) from a multiple of I_{s^2}"""
    total = np.kron(p.prep_array().sum(axis=0).conj(), p.effect_array().sum(axis=0))
    size = total.shape[0]
    c = np.trace(total).real / size
    target = c * np.eye(size)
    return float(np.linalg.norm(total - target) / np.linalg.norm(target))


def group_sums(p: TomographyProtocol) -> List[np.ndarray]:
    """Sum of the effect operators of every measurement scheme"""
    effects = p.effect_array()
    return [effects[idx].sum(axis=0) for idx in p.groups()]

