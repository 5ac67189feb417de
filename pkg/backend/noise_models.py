# backend/noise_models.py
"""
Standard qubit channels used as SPAM-error building blocks and as true gates.

Relaxation follows the usual (T1, T2) parameterization: amplitude damping with
decay probability 1 - exp(-t/T1) plus pure dephasing at rate 1/T2 - 1/(2 T1),
so the composite decays coherences as exp(-t/T2).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .channels import PAULI, KrausSet, canonical_kraus, compose_channels, identity_channel, tensor_power
from .errors import ConfigError

logger = logging.getLogger(__name__)

NOISE_KINDS = ("depolarizing", "amplitude_damping", "dephasing", "unitary_rotation", "composite")
NOISE_ORDERS = ("after", "before")


@dataclass(frozen=True)
class NoiseSpec:
    """Parametric description of a single-qubit noise channel.

    Times are in units of the gate duration. A composite with no children is
    the identity channel.
    """

    kind: str = "composite"
    gamma: Optional[float] = None
    t1: Optional[float] = None
    t2: Optional[float] = None
    duration: float = 1.0
    theta: Optional[float] = None
    axis: Optional[Tuple[float, float, float]] = None
    children: Tuple["NoiseSpec", ...] = field(default_factory=tuple)
    order: str = "after"

    @classmethod
    def identity(cls) -> "NoiseSpec":
        return cls(kind="composite")

    @classmethod
    def depolarizing(cls, gamma: float) -> "NoiseSpec":
        return cls(kind="depolarizing", gamma=gamma)

    @classmethod
    def damping(cls, t1: float, duration: float = 1.0) -> "NoiseSpec":
        return cls(kind="amplitude_damping", t1=t1, duration=duration)

    @classmethod
    def relaxation(cls, t1: float, t2: float, duration: float = 1.0, order: str = "after") -> "NoiseSpec":
        """Amplitude damping followed by pure dephasing over the same duration"""
        return cls(
            kind="composite",
            children=(cls.damping(t1, duration), cls(kind="dephasing", t1=t1, t2=t2, duration=duration)),
            order=order,
        )

    @property
    def is_identity(self) -> bool:
        if self.kind == "composite":
            return all(child.is_identity for child in self.children)
        if self.kind == "depolarizing":
            return not self.gamma
        if self.kind == "unitary_rotation":
            return not self.theta
        return self.duration == 0

    def validate(self, path: str = "noise") -> List[str]:
        """Return a list of problems, each prefixed with its dotted field path"""
        issues = []
        if self.kind not in NOISE_KINDS:
            return [f"{path}.kind: unknown noise kind '{self.kind}' (expected one of {', '.join(NOISE_KINDS)})"]
        if self.order not in NOISE_ORDERS:
            issues.append(f"{path}.order: must be 'after' or 'before', got '{self.order}'")
        if self.duration is None or self.duration < 0:
            issues.append(f"{path}.duration: must be >= 0")
        if self.kind == "depolarizing":
            if self.gamma is None or not 0.0 <= self.gamma <= 1.0:
                issues.append(f"{path}.gamma: depolarizing probability must lie in [0, 1]")
        elif self.kind == "amplitude_damping":
            if self.t1 is None or self.t1 <= 0:
                issues.append(f"{path}.t1: must be positive")
        elif self.kind == "dephasing":
            if self.t2 is None or self.t2 <= 0:
                issues.append(f"{path}.t2: must be positive")
            elif self.t1 is not None and self.t2 > 2 * self.t1:
                issues.append(f"{path}.t2: T2={self.t2} exceeds 2*T1={2 * self.t1} (unphysical)")
        elif self.kind == "unitary_rotation":
            if self.theta is None:
                issues.append(f"{path}.theta: required for a rotation")
            if self.axis is None or len(self.axis) != 3:
                issues.append(f"{path}.axis: must be a 3-vector")
            elif abs(np.linalg.norm(self.axis) - 1) > 1e-10:
                issues.append(f"{path}.axis: must have unit length")
        for idx, child in enumerate(self.children):
            issues.extend(child.validate(f"{path}.children[{idx}]"))
        return issues

    @classmethod
    def from_dict(cls, data: Optional[Dict], path: str = "noise") -> "NoiseSpec":
        if not data:
            return cls.identity()
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
        unknown = set(data) - {"kind", "gamma", "t1", "t2", "duration", "theta", "axis", "children", "order"}
        if unknown:
            raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")
        children = tuple(
            cls.from_dict(child, f"{path}.children[{i}]") for i, child in enumerate(data.get("children") or [])
        )
        axis = data.get("axis")
        return cls(
            kind=data.get("kind", "composite"),
            gamma=_optional_float(data.get("gamma")),
            t1=_optional_float(data.get("t1")),
            t2=_optional_float(data.get("t2")),
            duration=float(data.get("duration", 1.0)),
            theta=_optional_float(data.get("theta")),
            axis=tuple(float(x) for x in axis) if axis is not None else None,
            children=children,
            order=data.get("order", "after"),
        )

    def to_dict(self) -> Dict:
        out = {"kind": self.kind, "order": self.order}
        for name in ("gamma", "t1", "t2", "theta"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.kind in ("amplitude_damping", "dephasing"):
            out["duration"] = self.duration
        if self.axis is not None:
            out["axis"] = list(self.axis)
        if self.children:
            out["children"] = [child.to_dict() for child in self.children]
        return out


def _optional_float(value) -> Optional[float]:
    return None if value is None else float(value)


def depolarizing_channel(gamma: float) -> KrausSet:
    """E(rho) = (1 - gamma) rho + gamma I/2"""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"Depolarizing probability must lie in [0, 1], got {gamma}")
    weights = [math.sqrt(1 - 3 * gamma / 4)] + [math.sqrt(gamma / 4)] * 3
    return KrausSet(tuple(w * PAULI[c] for w, c in zip(weights, "IXYZ")))


def amplitude_damping_channel(t1: float, duration: float) -> KrausSet:
    if t1 <= 0:
        raise ValueError(f"T1 must be positive, got {t1}")
    if duration < 0:
        raise ValueError(f"Duration must be non-negative, got {duration}")
    decay = 1.0 - math.exp(-duration / t1)
    e0 = np.array([[1, 0], [0, math.sqrt(1 - decay)]], dtype=complex)
    e1 = np.array([[0, math.sqrt(decay)], [0, 0]], dtype=complex)
    return KrausSet((e0, e1))


def dephasing_channel(t2: float, t1: Optional[float], duration: float) -> KrausSet:
    """Pure dephasing completing amplitude damping to a total exp(-t/T2) coherence decay"""
    if t2 <= 0:
        raise ValueError(f"T2 must be positive, got {t2}")
    if t1 is not None and t2 > 2 * t1:
        raise ValueError(f"T2={t2} exceeds 2*T1={2 * t1}: unphysical relaxation")
    rate = 1.0 / t2 - (0.0 if t1 is None else 1.0 / (2 * t1))
    coherence = math.exp(-duration * rate)
    e0 = math.sqrt((1 + coherence) / 2) * PAULI["I"]
    e1 = math.sqrt((1 - coherence) / 2) * PAULI["Z"]
    return KrausSet((e0, e1))


def rotation_matrix(theta: float, axis: Sequence[float]) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1) > 1e-10:
        raise ValueError(f"Rotation axis must be a unit 3-vector, got {axis.tolist()}")
    generator = axis[0] * PAULI["X"] + axis[1] * PAULI["Y"] + axis[2] * PAULI["Z"]
    return linalg.expm(-0.5j * theta * generator)


def rotation_gate(theta: float, axis: Sequence[float]) -> KrausSet:
    """exp(-i theta/2 n.sigma)"""
    return KrausSet((rotation_matrix(theta, axis),))


def noise_channel(spec: NoiseSpec) -> KrausSet:
    """Single-qubit channel described by spec (children applied in listed order)"""
    issues = spec.validate()
    if issues:
        raise ConfigError(issues)
    if spec.kind == "depolarizing":
        return depolarizing_channel(spec.gamma)
    if spec.kind == "amplitude_damping":
        return amplitude_damping_channel(spec.t1, spec.duration)
    if spec.kind == "dephasing":
        return dephasing_channel(spec.t2, spec.t1, spec.duration)
    if spec.kind == "unitary_rotation":
        return rotation_gate(spec.theta, spec.axis)
    channel = identity_channel(2)
    for child in spec.children:
        channel = compose_channels(channel, noise_channel(child))
    return canonical_kraus(channel)


def noisy_gate(ideal: KrausSet, spec: NoiseSpec) -> KrausSet:
    """Ideal gate with the noise of spec attached before or after it.

    A multi-qubit gate receives the single-qubit noise on every qubit.
    """
    if spec.is_identity:
        return ideal
    noise = noise_channel(spec)
    n_qubits = int(round(math.log2(ideal.dim)))
    if noise.dim != ideal.dim:
        noise = tensor_power(noise, n_qubits)
    if spec.order == "before":
        return compose_channels(noise, ideal)
    return compose_channels(ideal, noise)


def local_noise(spec: NoiseSpec, n_qubits: int) -> KrausSet:
    """spec acting independently on each of n_qubits"""
    return tensor_power(noise_channel(spec), n_qubits)
