# backend/__init__.py
"""
fuzzytomo backend: SPAM-aware quantum process tomography
"""
from .channels import (DensityMatrix, KrausSet, ProcessChi, apply_channel, canonical_kraus, chi_to_kraus,
                       choi_state, compose_channels, kraus_to_chi, partial_trace_b, pauli_representation,
                       process_fidelity, tensor_channel)
from .errors import (ConfigError, ConvergenceError, DimensionError, NonPhysicalError, NumericalError,
                     RecordIOError, SingularProtocolError, TomographyError)
from .experiment import ExperimentConfig, GateSpec
from .measurement_record import MeasurementRecord
from .mle_engine import (RootFactor, SolverOptions, fidelity_report, log_likelihood, reconstruct_at_rank,
                         solve_fixed_point, warm_start)
from .model_selection import AdequacyReport, RankSelection, chi2_statistic, chi2_survival, degrees_of_freedom, select_rank
from .noise_models import (NoiseSpec, amplitude_damping_channel, dephasing_channel, depolarizing_channel,
                           noisy_gate, rotation_gate)
from .protocol_builder import (TomographyProtocol, chi_measurement_operator, cube_protocol, fuzzify_gn,
                               fuzzify_ippm, fuzzify_ng, fuzzify_ngn, normalization_complement,
                               unity_decomposition_residual)
from .report_generator import ReportGenerator
from .spam_simulator import SpamScenario, SpamSimulator, born_probabilities, exact_counts, simulate_counts
from .tomography_processor import TomographyProcessor

__all__ = [
    'TomographyProcessor',
    'ExperimentConfig',
    'GateSpec',
    'ReportGenerator',
    'DensityMatrix',
    'KrausSet',
    'ProcessChi',
    'apply_channel',
    'kraus_to_chi',
    'chi_to_kraus',
    'canonical_kraus',
    'choi_state',
    'partial_trace_b',
    'process_fidelity',
    'tensor_channel',
    'compose_channels',
    'pauli_representation',
    'NoiseSpec',
    'depolarizing_channel',
    'amplitude_damping_channel',
    'dephasing_channel',
    'rotation_gate',
    'noisy_gate',
    'TomographyProtocol',
    'cube_protocol',
    'chi_measurement_operator',
    'fuzzify_gn',
    'fuzzify_ng',
    'fuzzify_ngn',
    'fuzzify_ippm',
    'normalization_complement',
    'unity_decomposition_residual',
    'SpamScenario',
    'SpamSimulator',
    'MeasurementRecord',
    'born_probabilities',
    'simulate_counts',
    'exact_counts',
    'RootFactor',
    'SolverOptions',
    'log_likelihood',
    'solve_fixed_point',
    'warm_start',
    'reconstruct_at_rank',
    'fidelity_report',
    'AdequacyReport',
    'RankSelection',
    'chi2_statistic',
    'chi2_survival',
    'degrees_of_freedom',
    'select_rank',
    'TomographyError',
    'ConfigError',
    'DimensionError',
    'NonPhysicalError',
    'NumericalError',
    'ConvergenceError',
    'SingularProtocolError',
    'RecordIOError',
]
