# backend/experiment.py
"""
Experiment configuration: which gate, which SPAM scenario, how many copies
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import yaml

from .channels import PAULI, KrausSet, identity_channel, unitary_channel
from .errors import ConfigError, RecordIOError, TomographyError
from .mle_engine import SolverOptions
from .noise_models import rotation_gate
from .record_io import decode_matrix, encode_matrix
from .spam_simulator import SpamScenario

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PROTOCOL_MODELS = ("standard", "gn", "ng", "ippm_true")
GATE_NAMES = ("identity", "hadamard", "cnot", "x", "y", "z", "rotation", "custom")

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def normalize_model(name: str) -> str:
    """Accept the CLI spelling ippm-true for ippm_true"""
    return name.replace("-", "_").lower()


@dataclass(frozen=True)
class GateSpec:
    name: str = "hadamard"
    theta: Optional[float] = None
    axis: Optional[Tuple[float, float, float]] = None
    kraus: Tuple = ()

    def validate(self, n_qubits: int, path: str = "experiment.gate") -> List[str]:
        issues = []
        if self.name not in GATE_NAMES:
            return [f"{path}.name: unknown gate '{self.name}' (expected one of {', '.join(GATE_NAMES)})"]
        if self.name == "cnot" and n_qubits != 2:
            issues.append(f"{path}.name: cnot needs n_qubits = 2, got {n_qubits}")
        if self.name in ("hadamard", "x", "y", "z", "rotation") and n_qubits != 1:
            issues.append(f"{path}.name: {self.name} is a one-qubit gate, got n_qubits = {n_qubits}")
        if self.name == "rotation":
            if self.theta is None:
                issues.append(f"{path}.theta: required for a rotation gate")
            if self.axis is None or len(self.axis) != 3 or abs(np.linalg.norm(self.axis) - 1) > 1e-10:
                issues.append(f"{path}.axis: must be a unit 3-vector")
        if self.name == "custom":
            if not self.kraus:
                issues.append(f"{path}.kraus: custom gate needs at least one Kraus operator")
            else:
                try:
                    ops = [decode_matrix(op) for op in self.kraus]
                    if any(op.shape != (2 ** n_qubits, 2 ** n_qubits) for op in ops):
                        issues.append(f"{path}.kraus: operators must be {2 ** n_qubits}x{2 ** n_qubits}")
                    elif KrausSet(tuple(ops)).tp_residual() > 1e-8:
                        issues.append(f"{path}.kraus: operators are not trace-preserving")
                except (TomographyError, ValueError) as e:
                    issues.append(f"{path}.kraus: {e}")
        return issues

    def build(self, n_qubits: int) -> KrausSet:
        issues = self.validate(n_qubits)
        if issues:
            raise ConfigError(issues)
        if self.name == "identity":
            return identity_channel(2 ** n_qubits)
        if self.name == "hadamard":
            return unitary_channel(HADAMARD)
        if self.name == "cnot":
            return unitary_channel(CNOT)
        if self.name in ("x", "y", "z"):
            return unitary_channel(PAULI[self.name.upper()])
        if self.name == "rotation":
            return rotation_gate(self.theta, self.axis)
        return KrausSet(tuple(decode_matrix(op) for op in self.kraus))

    @classmethod
    def from_dict(cls, data, path: str = "experiment.gate") -> "GateSpec":
        if isinstance(data, str):
            return cls(name=data.lower())
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a gate name or mapping")
        unknown = set(data) - {"name", "theta", "axis", "kraus"}
        if unknown:
            raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")
        axis = data.get("axis")
        return cls(
            name=str(data.get("name", "hadamard")).lower(),
            theta=None if data.get("theta") is None else float(data["theta"]),
            axis=None if axis is None else tuple(float(x) for x in axis),
            kraus=tuple(data.get("kraus") or ()),
        )

    def to_dict(self) -> Dict:
        out = {"name": self.name}
        if self.theta is not None:
            out["theta"] = self.theta
        if self.axis is not None:
            out["axis"] = list(self.axis)
        if self.kraus:
            out["kraus"] = list(self.kraus)
        return out

    @classmethod
    def from_kraus(cls, k: KrausSet) -> "GateSpec":
        return cls(name="custom", kraus=tuple(encode_matrix(op) for op in k.operators))


@dataclass(frozen=True)
class ExperimentConfig:
    gate: GateSpec = field(default_factory=GateSpec)
    n_qubits: int = 1
    scenario: SpamScenario = field(default_factory=SpamScenario)
    protocol_model: str = "standard"
    n_per_scheme: int = 1000
    sample_sizes: Tuple[int, ...] = ()
    trials: int = 1
    alpha: float = 0.05
    solver: SolverOptions = field(default_factory=SolverOptions)
    seed: int = 0
    exact: bool = False
    workers: int = 1
    name: str = "experiment"

    @property
    def sizes(self) -> Tuple[int, ...]:
        """Sample sizes to simulate; a single n_per_scheme unless a sweep is configured"""
        return self.sample_sizes or (self.n_per_scheme,)

    def true_gate(self) -> KrausSet:
        return self.gate.build(self.n_qubits)

    def validate(self) -> List[str]:
        issues = []
        if self.n_qubits < 1:
            issues.append("experiment.n_qubits: must be >= 1")
        else:
            issues.extend(self.gate.validate(self.n_qubits))
        if self.protocol_model not in PROTOCOL_MODELS:
            issues.append(f"experiment.protocol_model: must be one of {', '.join(PROTOCOL_MODELS)}")
        if self.n_per_scheme < 1:
            issues.append("experiment.n_per_scheme: must be >= 1")
        if any(n < 1 for n in self.sample_sizes):
            issues.append("experiment.sample_sizes: every size must be >= 1")
        if self.trials < 1:
            issues.append("experiment.trials: must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            issues.append("experiment.alpha: must lie in (0, 1)")
        if self.workers < 1:
            issues.append("experiment.workers: must be >= 1")
        issues.extend(self.scenario.validate("scenario"))
        issues.extend(self.solver.validate("solver"))
        return issues

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: expected a mapping at the top level")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported version {version} (expected {SCHEMA_VERSION})")
        unknown = set(data) - {"schema_version", "experiment", "scenario", "solver"}
        if unknown:
            raise ConfigError(f"config: unknown sections {sorted(unknown)}")

        exp = dict(data.get("experiment") or {})
        known = {"name", "gate", "n_qubits", "protocol_model", "n_per_scheme", "sample_sizes",
                 "trials", "alpha", "seed", "exact", "workers"}
        unknown = set(exp) - known
        if unknown:
            raise ConfigError(f"experiment: unknown fields {sorted(unknown)}")

        try:
            config = cls(
                gate=GateSpec.from_dict(exp.get("gate", "hadamard")),
                n_qubits=int(exp.get("n_qubits", 1)),
                scenario=SpamScenario.from_dict(data.get("scenario")),
                protocol_model=normalize_model(str(exp.get("protocol_model", "standard"))),
                n_per_scheme=int(exp.get("n_per_scheme", 1000)),
                sample_sizes=tuple(int(n) for n in exp.get("sample_sizes") or ()),
                trials=int(exp.get("trials", 1)),
                alpha=float(exp.get("alpha", 0.05)),
                solver=SolverOptions.from_dict(data.get("solver")),
                seed=int(exp.get("seed", 0)),
                exact=bool(exp.get("exact", False)),
                workers=int(exp.get("workers", 1)),
                name=str(exp.get("name", "experiment")),
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config: {e}")

        issues = config.validate()
        if issues:
            raise ConfigError(issues)
        return config

    @classmethod
    def from_yaml(cls, path: str) -> "ExperimentConfig":
        config_path = Path(path)
        if not config_path.exists():
            raise RecordIOError("Config file not found", str(config_path))
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"{config_path}: invalid YAML ({e})")
        logger.info(f"Loaded experiment config from {config_path}")
        return cls.from_dict(data or {})

    def to_dict(self) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": {
                "name": self.name,
                "gate": self.gate.to_dict(),
                "n_qubits": self.n_qubits,
                "protocol_model": self.protocol_model,
                "n_per_scheme": self.n_per_scheme,
                "sample_sizes": list(self.sample_sizes),
                "trials": self.trials,
                "alpha": self.alpha,
                "seed": self.seed,
                "exact": self.exact,
                "workers": self.workers,
            },
            "scenario": self.scenario.to_dict(),
            "solver": self.solver.to_dict(),
        }

    def with_overrides(self, alpha: Optional[float] = None, seed: Optional[int] = None) -> "ExperimentConfig":
        """Copy with command-line overrides applied"""
        updated = replace(
            self,
            alpha=self.alpha if alpha is None else alpha,
            seed=self.seed if seed is None else seed,
        )
        issues = updated.validate()
        if issues:
            raise ConfigError(issues)
        return updated
