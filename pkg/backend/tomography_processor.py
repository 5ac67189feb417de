# backend/tomography_processor.py
"""
Main orchestrator: simulate, calibrate, reconstruct, report
"""
import glob
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .channels import (KrausSet, chi_to_kraus, identity_channel, kraus_to_chi,
                       partial_trace_b, pauli_representation)
from .errors import ConfigError, RecordIOError, TomographyError
from .experiment import ExperimentConfig, GateSpec, PROTOCOL_MODELS, normalize_model
from .measurement_record import MeasurementRecord
from .mle_engine import SolverOptions, fidelity_report
from .model_selection import DEFAULT_ALPHA, select_rank
from .protocol_builder import TomographyProtocol, cube_protocol, fuzzify_gn, fuzzify_ng
from .record_io import (encode_matrix, read_calibration, read_counts, write_calibration, write_counts,
                        write_protocol, write_result)
from .report_generator import ReportGenerator
from .spam_simulator import SpamScenario, SpamSimulator, true_protocol

# Configure logging
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def trial_seeds(seed: int, count: int) -> List[int]:
    """Independent per-trial seeds derived from one experiment seed"""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def expand_paths(pattern: Union[str, List[str]], suffix: str) -> List[str]:
    """A directory, a glob pattern or an explicit list, resolved to sorted file paths"""
    if isinstance(pattern, (list, tuple)):
        return sorted(str(p) for p in pattern)
    if os.path.isdir(pattern):
        return sorted(glob.glob(os.path.join(pattern, "**", f"*{suffix}"), recursive=True))
    return sorted(glob.glob(pattern))


def exit_code_for(e: Exception) -> int:
    if isinstance(e, TomographyError):
        return e.exit_code
    if isinstance(e, ValueError):
        return 2
    if isinstance(e, OSError):
        return 4
    return 1


def infer_qubits(rec: MeasurementRecord) -> int:
    if "n_qubits" in rec.metadata:
        return int(rec.metadata["n_qubits"])
    rows = len(rec.real_rows())
    n_qubits = int(round(math.log(rows, 36))) if rows else 0
    if n_qubits < 1 or 36 ** n_qubits != rows:
        raise ConfigError(f"Cannot infer the qubit count from {rows} count rows")
    return n_qubits


def _simulate_task(task: Dict) -> str:
    config = ExperimentConfig.from_dict(task["config"])
    protocol = cube_protocol(config.n_qubits)
    simulator = SpamSimulator(config.scenario, protocol)
    gate = config.true_gate()
    if config.exact:
        rec = simulator.exact_counts(gate, task["n"])
    else:
        rec = simulator.simulate_counts(gate, task["n"], task["seed"])
    header = {
        "protocol": task["protocol_file"],
        "experiment": config.name,
        "gate": config.gate.to_dict(),
        "n_qubits": config.n_qubits,
        "n": task["n"],
        "trial": task["trial"],
        "scenario": config.scenario.to_dict(),
    }
    return write_counts(rec, task["path"], header)


def _reconstruct_task(task: Dict) -> str:
    processor = TomographyProcessor(output_dir=task["output_dir"])
    return processor.reconstruct_file(**{k: v for k, v in task.items() if k != "output_dir"})


class TomographyProcessor:
    """Main orchestrator for tomography experiments"""

    def __init__(self, output_dir: Optional[str] = None):
        self.output_dir = output_dir or os.getenv("TOMO_OUTPUT_DIR", "exports")
        self.results = {}

    def failure(self, e: Exception) -> Dict:
        logger.error(f"Processing failed: {str(e)}")
        self.results = {
            'success': False,
            'error': str(e),
            'error_type': type(e).__name__,
            'exit_code': exit_code_for(e),
        }
        return self.results

    def _map(self, func, tasks: List[Dict], workers: int) -> List:
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(func, tasks))
        return [func(task) for task in tasks]

    def cmd_simulate(self, config: ExperimentConfig, out_path: Optional[str] = None) -> Dict:
        """
        Simulate count files for every sample size and trial

        Args:
            config: Validated experiment configuration
            out_path: Output directory (defaults to the processor output_dir)

        Returns:
            Dictionary with the protocol file, the count files and status
        """
        try:
            out_dir = Path(out_path or self.output_dir)
            protocol = cube_protocol(config.n_qubits)
            protocol_file = write_protocol(protocol, str(out_dir / "protocol.yaml"))
            logger.info(f"Protocol written: {protocol_file} (m_p={protocol.m_p}, m_m={protocol.m_m})")

            tasks = []
            seeds = iter(trial_seeds(config.seed, len(config.sizes) * config.trials))
            for n in config.sizes:
                for trial in range(config.trials):
                    tasks.append({
                        "config": config.to_dict(),
                        "n": n,
                        "trial": trial,
                        "seed": next(seeds),
                        "protocol_file": "protocol.yaml",
                        "path": str(out_dir / "counts" / f"n{n}_trial{trial:04d}.csv"),
                    })
            files = self._map(_simulate_task, tasks, config.workers)
            logger.info(f"Wrote {len(files)} count files for gate '{config.gate.name}'")

            self.results = {
                'success': True,
                'protocol_file': protocol_file,
                'files': files,
                'stats': {'sample_sizes': list(config.sizes), 'trials': config.trials, 'exact': config.exact},
                'exit_code': 0,
            }
            return self.results
        except Exception as e:
            return self.failure(e)

    def cmd_calibrate(self, counts_path: str, out_path: str, alpha: float = DEFAULT_ALPHA,
                      rank: Optional[int] = None, opts: SolverOptions = SolverOptions()) -> Dict:
        """
        Empty-gate tomography: chi_noise and its Kraus operators

        Args:
            counts_path: Count CSV taken with the identity gate
            out_path: Calibration YAML to write
            alpha: Significance level of the rank test
            rank: Fixed rank, or None to climb the rank ladder
            opts: Solver options

        Returns:
            Dictionary with the calibration file, rank, identity fidelity and status
        """
        try:
            rec = read_counts(counts_path)
            gate = rec.metadata.get("gate")
            if gate is not None and GateSpec.from_dict(gate).name != "identity":
                logger.warning(f"Calibration counts were taken with gate '{GateSpec.from_dict(gate).name}', "
                               "not the empty gate")
            protocol = cube_protocol(infer_qubits(rec))

            selection = select_rank(rec, protocol, alpha, opts, ranks=None if rank is None else [rank])
            if not selection.estimable:
                logger.warning(f"Calibration rank not estimable; emitting the rank-{selection.chosen_rank} tomogram")
            kraus = chi_to_kraus(selection.chi, selection.chosen_rank)
            fidelity = fidelity_report(selection.chi, kraus_to_chi(identity_channel(protocol.dim)))
            logger.info(f"Empty-gate fidelity {fidelity:.4f} at rank {selection.chosen_rank}")

            summary = {
                "counts": str(counts_path),
                "n_qubits": protocol.n_qubits,
                "rank": selection.chosen_rank,
                "estimable": selection.estimable,
                "alpha": alpha,
                "fidelity_identity": fidelity,
                "trace_preserving": kraus.trace_preserving,
                "ladder": [report.to_dict() for report in selection.reports],
            }
            calibration_file = write_calibration(out_path, selection.chi, kraus, summary)
            self.results = {
                'success': True,
                'calibration_file': calibration_file,
                'rank': selection.chosen_rank,
                'estimable': selection.estimable,
                'fidelity_identity': fidelity,
                'exit_code': 0,
            }
            return self.results
        except Exception as e:
            return self.failure(e)

    def build_protocol(self, model: str, n_qubits: int, calibration: Optional[KrausSet] = None,
                       scenario: Optional[SpamScenario] = None) -> TomographyProtocol:
        ideal = cube_protocol(n_qubits)
        if model == "standard":
            return ideal
        if model in ("gn", "ng"):
            if calibration is None:
                raise ConfigError(f"protocol model '{model}' needs a calibration file (--calibration)")
            return fuzzify_gn(ideal, calibration) if model == "gn" else fuzzify_ng(ideal, calibration)
        if model == "ippm_true":
            if scenario is None:
                raise ConfigError("protocol model 'ippm_true' needs the simulated scenario (count header or --config)")
            return true_protocol(scenario, ideal)
        raise ConfigError(f"Unknown protocol model '{model}' (expected one of {', '.join(PROTOCOL_MODELS)})")

    def reconstruct_file(self, counts_path: str, model: str, out_path: str, calibration_path: Optional[str] = None,
                         alpha: float = DEFAULT_ALPHA, rank: Optional[int] = None,
                         solver: Optional[Dict] = None, scenario: Optional[Dict] = None) -> str:
        """Reconstruct one count file and write its result file"""
        opts = SolverOptions.from_dict(solver)
        rec = read_counts(counts_path)
        n_qubits = infer_qubits(rec)

        calibration = read_calibration(calibration_path)[1] if calibration_path else None
        scenario_data = scenario if scenario is not None else rec.metadata.get("scenario")
        true_scenario = SpamScenario.from_dict(scenario_data) if scenario_data is not None else None
        protocol = self.build_protocol(model, n_qubits, calibration, true_scenario)

        selection = select_rank(rec, protocol, alpha, opts, ranks=None if rank is None else [rank])
        chi_hat = selection.chi

        fidelity = None
        if rec.metadata.get("gate") is not None:
            reference = kraus_to_chi(GateSpec.from_dict(rec.metadata["gate"]).build(n_qubits))
            fidelity = fidelity_report(chi_hat, reference)

        factor = selection.factor
        result = {
            "created": datetime.now().isoformat(timespec="seconds"),
            "counts": str(counts_path),
            "protocol": rec.metadata.get("protocol"),
            "calibration": calibration_path,
            "protocol_model": model,
            "gate": rec.metadata.get("gate"),
            "n": rec.metadata.get("n"),
            "trial": rec.metadata.get("trial"),
            "seed": rec.seed,
            "sampling": rec.sampling,
            "alpha": alpha,
            "chosen_rank": selection.chosen_rank,
            "estimable": selection.estimable,
            "fidelity": fidelity,
            "trace_residual": float(np.linalg.norm(partial_trace_b(chi_hat) - np.eye(chi_hat.dim))),
            "log_likelihood": factor.log_likelihood,
            "iterations": factor.iterations,
            "residual": factor.residual,
            "converged": factor.converged,
            "ladder": [report.to_dict() for report in selection.reports],
            "chi": encode_matrix(chi_hat.matrix),
            "chi_pauli": encode_matrix(pauli_representation(chi_hat).matrix),
        }
        path = write_result(out_path, result)
        logger.info(f"{Path(counts_path).name}: model={model}, rank={selection.chosen_rank}, "
                    f"fidelity={'n/a' if fidelity is None else f'{fidelity:.6f}'}")
        return path

    def cmd_reconstruct(self, counts: Union[str, List[str]], model: str, out_path: Optional[str] = None,
                        calibration_path: Optional[str] = None, alpha: float = DEFAULT_ALPHA,
                        rank: Optional[int] = None, config: Optional[ExperimentConfig] = None) -> Dict:
        """
        Reconstruct every count file matched by counts

        Args:
            counts: Directory, glob pattern or list of count CSVs
            model: Protocol model (standard, gn, ng or ippm_true)
            out_path: Output directory; results land in out_path/<model>/
            calibration_path: Calibration YAML, required by gn and ng
            alpha: Significance level of the rank test
            rank: Fixed rank, or None to climb the rank ladder
            config: Experiment configuration supplying solver options, scenario and workers

        Returns:
            Dictionary with the result files and status
        """
        try:
            model = normalize_model(model)
            if model not in PROTOCOL_MODELS:
                raise ConfigError(f"--model: must be one of {', '.join(PROTOCOL_MODELS)}")
            if model in ("gn", "ng") and not calibration_path:
                raise ConfigError(f"protocol model '{model}' needs a calibration file (--calibration)")
            files = expand_paths(counts, ".csv")
            if not files:
                raise RecordIOError("No count files matched", str(counts))

            out_dir = Path(out_path or self.output_dir) / model
            workers = config.workers if config else 1
            tasks = [
                {
                    "output_dir": self.output_dir,
                    "counts_path": path,
                    "model": model,
                    "out_path": str(out_dir / f"{Path(path).stem}.yaml"),
                    "calibration_path": calibration_path,
                    "alpha": alpha,
                    "rank": rank,
                    "solver": config.solver.to_dict() if config else None,
                    "scenario": config.scenario.to_dict() if config else None,
                }
                for path in files
            ]
            written = self._map(_reconstruct_task, tasks, workers)
            self.results = {
                'success': True,
                'files': written,
                'stats': {'reconstructed': len(written), 'protocol_model': model},
                'exit_code': 0,
            }
            return self.results
        except Exception as e:
            return self.failure(e)

    def cmd_report(self, results: Union[str, List[str]], fmt: str = "csv", out_path: Optional[str] = None) -> Dict:
        """
        Aggregate result files into reports

        Args:
            results: Directory, glob pattern or list of result YAMLs
            fmt: csv for tables, yaml for one structured file
            out_path: Output directory (defaults to the processor output_dir)

        Returns:
            Dictionary with the written report files and status
        """
        try:
            files = expand_paths(results, ".yaml")
            generator = ReportGenerator(output_dir=out_path or self.output_dir)
            written = generator.save_reports(files, fmt=fmt)
            self.results = {'success': True, 'files': written, 'exit_code': 0}
            return self.results
        except Exception as e:
            return self.failure(e)
