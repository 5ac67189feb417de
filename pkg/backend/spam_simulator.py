# backend/spam_simulator.py
"""
Synthetic measurement statistics for a true gate under a SPAM scenario
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .channels import KrausSet, ProcessChi, identity_channel, kraus_to_chi, tensor_channel
from .errors import ConfigError, DimensionError, NonPhysicalError
from .measurement_record import SAMPLING_MODES, MeasurementRecord
from .noise_models import NoiseSpec, local_noise, noisy_gate, rotation_gate
from .protocol_builder import Rotation, TomographyProtocol, fuzzify_ippm

logger = logging.getLogger(__name__)

PROB_TOL = 1e-10


@dataclass(frozen=True)
class SpamScenario:
    """Single-qubit SPAM error channels, applied locally to every qubit"""

    init_noise: NoiseSpec = field(default_factory=NoiseSpec.identity)
    prep_noise: NoiseSpec = field(default_factory=NoiseSpec.identity)
    basis_noise: NoiseSpec = field(default_factory=NoiseSpec.identity)
    meas_noise: NoiseSpec = field(default_factory=NoiseSpec.identity)
    sampling: str = "multinomial_per_scheme"
    # a theta = 0 slot means no gate is applied; idle_noise charges it gate noise anyway
    idle_noise: bool = False

    @classmethod
    def ideal(cls, sampling: str = "multinomial_per_scheme") -> "SpamScenario":
        return cls(sampling=sampling)

    @classmethod
    def relaxation_scenario(cls, gamma: float = 0.01, t1: float = 100.0, t2: float = 50.0,
                            meas_t1: float = 20.0, sampling: str = "multinomial_per_scheme") -> "SpamScenario":
        """Depolarized initialization, T1/T2 relaxation on every rotation, damping before readout"""
        gate_noise = NoiseSpec.relaxation(t1, t2, duration=1.0)
        return cls(
            init_noise=NoiseSpec.depolarizing(gamma),
            prep_noise=gate_noise,
            basis_noise=gate_noise,
            meas_noise=NoiseSpec.damping(meas_t1, duration=1.0),
            sampling=sampling,
        )

    @property
    def is_ideal(self) -> bool:
        return all(spec.is_identity for spec in (self.init_noise, self.prep_noise, self.basis_noise, self.meas_noise))

    def validate(self, path: str = "scenario") -> List[str]:
        issues = []
        for name in ("init_noise", "prep_noise", "basis_noise", "meas_noise"):
            issues.extend(getattr(self, name).validate(f"{path}.{name}"))
        if self.sampling not in SAMPLING_MODES:
            issues.append(f"{path}.sampling: must be one of {', '.join(SAMPLING_MODES)}")
        return issues

    @classmethod
    def from_dict(cls, data: Optional[Dict], path: str = "scenario") -> "SpamScenario":
        data = dict(data or {})
        unknown = set(data) - {"init_noise", "prep_noise", "basis_noise", "meas_noise", "sampling", "idle_noise"}
        if unknown:
            raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")
        return cls(
            init_noise=NoiseSpec.from_dict(data.get("init_noise"), f"{path}.init_noise"),
            prep_noise=NoiseSpec.from_dict(data.get("prep_noise"), f"{path}.prep_noise"),
            basis_noise=NoiseSpec.from_dict(data.get("basis_noise"), f"{path}.basis_noise"),
            meas_noise=NoiseSpec.from_dict(data.get("meas_noise"), f"{path}.meas_noise"),
            sampling=data.get("sampling", "multinomial_per_scheme"),
            idle_noise=bool(data.get("idle_noise", False)),
        )

    def to_dict(self) -> Dict:
        return {
            "init_noise": self.init_noise.to_dict(),
            "prep_noise": self.prep_noise.to_dict(),
            "basis_noise": self.basis_noise.to_dict(),
            "meas_noise": self.meas_noise.to_dict(),
            "sampling": self.sampling,
            "idle_noise": self.idle_noise,
        }


def protocol_probabilities(chi: ProcessChi, p: TomographyProtocol) -> np.ndarray:
    """(m_p x m_m) grid of Tr(chi (rho_i* x Lambda_j))"""
    if chi.dim != p.dim:
        raise DimensionError(f"chi-matrix dimension {chi.dim} does not match protocol dimension {p.dim}")
    s = p.dim
    chi4 = chi.matrix.reshape(s, s, s, s)
    grid = np.einsum("xyuv,iux,jvy->ij", chi4, p.prep_array().conj(), p.effect_array())
    return grid.real


def born_probabilities(chi: ProcessChi, p: TomographyProtocol) -> np.ndarray:
    """Row probabilities p_j^(i), flattened preparation-major"""
    issues = chi.validate()
    if issues:
        raise NonPhysicalError(f"Non-physical chi-matrix: {'; '.join(issues)}")
    probs = protocol_probabilities(chi, p).ravel()
    if probs.min() < -PROB_TOL or probs.max() > 1 + PROB_TOL:
        raise NonPhysicalError(f"Probabilities outside [0, 1]: min={probs.min():.3e}, max={probs.max():.6f}")
    return np.clip(probs, 0.0, 1.0)


def _slot_gate(rotations, spec: NoiseSpec, idle_noise: bool) -> KrausSet:
    """Tensor product of single-qubit noisy rotations for one preparation or basis slot"""
    channel = None
    for rot in rotations:
        rot = Rotation(*rot)
        if rot.theta == 0 and not idle_noise:
            qubit = identity_channel(2)
        else:
            qubit = noisy_gate(rotation_gate(rot.theta, rot.axis), spec)
        channel = qubit if channel is None else tensor_channel(channel, qubit)
    return channel


def true_protocol(scenario: SpamScenario, ideal_protocol: TomographyProtocol) -> TomographyProtocol:
    """Physically realized protocol: IPPM assembly from the scenario channels"""
    issues = scenario.validate()
    if issues:
        raise ConfigError(issues)
    n = ideal_protocol.n_qubits
    init = local_noise(scenario.init_noise, n)
    meas = local_noise(scenario.meas_noise, n)
    prep_gates = [_slot_gate(prep.rotations, scenario.prep_noise, scenario.idle_noise)
                  for prep in ideal_protocol.preparations]
    basis_gates = [_slot_gate(rots, scenario.basis_noise, scenario.idle_noise)
                   for rots in ideal_protocol.basis_rotations]
    fuzzy = fuzzify_ippm(ideal_protocol, init, prep_gates, basis_gates, meas)
    logger.debug(f"Assembled true protocol for {n} qubit(s) from scenario")
    return fuzzy


class SpamSimulator:
    """Draws measurement records for gates measured with one ideal protocol under one scenario"""

    def __init__(self, scenario: SpamScenario, ideal_protocol: TomographyProtocol):
        self.scenario = scenario
        self.ideal_protocol = ideal_protocol
        self.physical_protocol = true_protocol(scenario, ideal_protocol)

    def probabilities(self, true_gate: KrausSet) -> np.ndarray:
        if true_gate.dim != self.ideal_protocol.dim:
            raise DimensionError(
                f"Gate dimension {true_gate.dim} does not match protocol dimension {self.ideal_protocol.dim}"
            )
        probs = born_probabilities(kraus_to_chi(true_gate), self.physical_protocol)
        return probs.reshape(self.ideal_protocol.m_p, self.ideal_protocol.m_m)

    def exact_counts(self, true_gate: KrausSet, n: float) -> MeasurementRecord:
        """Noise-free oracle: k = n p exactly (real-valued counts)"""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        grid = self.probabilities(true_gate)
        t = np.full(grid.shape, float(n))
        return MeasurementRecord.from_grid(t, n * grid, self.scenario.sampling,
                                           metadata={"n": n, "mode": "exact"})

    def simulate_counts(self, true_gate: KrausSet, n: int, seed: int) -> MeasurementRecord:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        grid = self.probabilities(true_gate)
        rng = np.random.default_rng(seed)
        t = np.full(grid.shape, float(n))
        if self.scenario.sampling == "poisson_independent":
            k = rng.poisson(n * grid)
        else:
            k = np.zeros(grid.shape)
            for idx in self.ideal_protocol.groups():
                pvals = grid[:, idx]
                totals = pvals.sum(axis=1, keepdims=True)
                if np.abs(totals - 1).max() > 1e-8:
                    logger.warning(f"Scheme probabilities sum to {totals.ravel().min():.6f}..{totals.ravel().max():.6f};"
                                   " renormalizing for multinomial sampling")
                k[:, idx] = rng.multinomial(n, pvals / totals)
        logger.debug(f"Simulated counts with n={n}, seed={seed}, sampling={self.scenario.sampling}")
        return MeasurementRecord.from_grid(t, k, self.scenario.sampling, seed=seed,
                                           metadata={"n": n, "mode": "sampled"})


def simulate_counts(true_gate: KrausSet, scenario: SpamScenario, ideal_protocol: TomographyProtocol,
                    n: int, seed: int) -> MeasurementRecord:
    return SpamSimulator(scenario, ideal_protocol).simulate_counts(true_gate, n, seed)


def exact_counts(true_gate: KrausSet, scenario: SpamScenario, ideal_protocol: TomographyProtocol,
                 n: float) -> MeasurementRecord:
    return SpamSimulator(scenario, ideal_protocol).exact_counts(true_gate, n)
