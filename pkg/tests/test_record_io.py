"""Tests for backend.record_io and backend.experiment"""
from pathlib import Path

import numpy as np
import pytest
import yaml

from backend.channels import kraus_to_chi, process_fidelity, random_kraus
from backend.errors import ConfigError, DimensionError, RecordIOError
from backend.experiment import ExperimentConfig, GateSpec
from backend.mle_engine import SolverOptions
from backend.model_selection import select_rank
from backend.protocol_builder import cube_protocol
from backend.record_io import (CountFile, decode_matrix, encode_matrix, file_kind, read_calibration, read_counts,
                               read_protocol, read_result, write_calibration, write_counts, write_protocol,
                               write_yaml)
from backend.spam_simulator import exact_counts, simulate_counts

ROOT = Path(__file__).parent.parent


class TestCountFiles:

    def test_counts_and_header_survive(self, tmp_path, cube1, hadamard, spam_scenario):
        rec = simulate_counts(hadamard, spam_scenario, cube1, 1000, seed=42)
        path = write_counts(rec, tmp_path / "counts.csv", {"protocol": "protocol.yaml", "n_qubits": 1})
        loaded = read_counts(path)
        assert np.array_equal(loaded.count_grid(6, 6)[1], rec.count_grid(6, 6)[1])
        assert loaded.seed == 42
        assert loaded.sampling == "multinomial_per_scheme"
        assert loaded.metadata["protocol"] == "protocol.yaml"

    def test_header_lines_are_comments(self, tmp_path, cube1, hadamard, ideal_scenario):
        rec = simulate_counts(hadamard, ideal_scenario, cube1, 10, seed=1)
        path = write_counts(rec, tmp_path / "counts.csv")
        lines = Path(path).read_text().splitlines()
        assert lines[0].startswith("# ")
        assert "prep_index,effect_index,t,k,fictitious" in lines

    def test_missing_file(self, tmp_path):
        with pytest.raises(RecordIOError, match="File not found"):
            read_counts(tmp_path / "absent.csv")

    def test_wrong_extension(self, tmp_path):
        path = tmp_path / "counts.txt"
        path.write_text("prep_index,effect_index,t,k,fictitious\n")
        valid, error = CountFile(path).validate_file()
        assert not valid
        assert "CSV" in error

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("prep_index,effect_index,k\n0,0,5\n")
        with pytest.raises(RecordIOError, match="missing columns: t, fictitious"):
            read_counts(path)

    def test_negative_counts(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("prep_index,effect_index,t,k,fictitious\n0,0,10,-1,False\n")
        with pytest.raises(RecordIOError, match="negative counts"):
            read_counts(path)


class TestYamlFiles:

    def test_matrix_encoding(self):
        mat = np.array([[1 + 2j, 0], [0.5, -1j]])
        assert np.array_equal(decode_matrix(encode_matrix(mat)), mat)

    def test_bad_matrix_shape(self):
        with pytest.raises(DimensionError, match=r"\[re, im\] pairs"):
            decode_matrix([[1.0, 2.0], [3.0, 4.0]])

    def test_protocol_file(self, tmp_path, cube1):
        path = write_protocol(cube1, tmp_path / "protocol.yaml")
        loaded = read_protocol(path)
        assert (loaded.m_p, loaded.m_m, loaded.m_b) == (6, 6, 3)
        assert np.allclose(loaded.effect_array(), cube1.effect_array())
        assert loaded.preparations[0].rotations == cube1.preparations[0].rotations

    def test_calibration_file(self, tmp_path, rng):
        k = random_kraus(2, 2, rng)
        chi = kraus_to_chi(k)
        path = write_calibration(tmp_path / "cal.yaml", chi, k, {"rank": 2, "trace_preserving": True})
        chi_back, k_back, summary = read_calibration(path)
        assert np.allclose(chi_back.matrix, chi.matrix)
        assert k_back.rank == 2
        assert k_back.trace_preserving
        assert summary["rank"] == 2
        assert file_kind(path) == "calibration"

    def test_wrong_kind(self, tmp_path):
        path = write_yaml(tmp_path / "x.yaml", {"kind": "protocol"})
        with pytest.raises(RecordIOError, match="Expected a result file"):
            read_result(path)

    def test_wrong_schema_version(self, tmp_path):
        path = tmp_path / "x.yaml"
        path.write_text(yaml.safe_dump({"schema_version": 7, "kind": "result"}))
        with pytest.raises(RecordIOError, match="schema_version"):
            read_result(path)

    def test_file_kind_of_foreign_file(self, tmp_path):
        path = tmp_path / "notes.yaml"
        path.write_text("- just\n- a list\n")
        assert file_kind(path) is None


class TestExperimentConfig:

    @pytest.mark.parametrize("name", ["config.yaml", "configs/calibration.yaml", "configs/sweep.yaml",
                                      "configs/cnot.yaml", "configs/hardware_demo.yaml"])
    def test_shipped_configs_load(self, name):
        config = ExperimentConfig.from_yaml(ROOT / name)
        assert config.validate() == []
        assert config.true_gate().dim == 2 ** config.n_qubits

    def test_sweep_sizes(self):
        config = ExperimentConfig.from_yaml(ROOT / "configs" / "sweep.yaml")
        assert config.sizes == (100, 1000, 10000)

    def test_defaults(self):
        config = ExperimentConfig.from_dict({})
        assert config.sizes == (1000,)
        assert config.gate.name == "hadamard"
        assert config.solver == SolverOptions()

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown sections"):
            ExperimentConfig.from_dict({"plots": {}})

    def test_unknown_experiment_field(self):
        with pytest.raises(ConfigError, match="unknown fields"):
            ExperimentConfig.from_dict({"experiment": {"shots": 100}})

    def test_schema_version(self):
        with pytest.raises(ConfigError, match="schema_version"):
            ExperimentConfig.from_dict({"schema_version": 2})

    def test_collects_every_issue(self):
        with pytest.raises(ConfigError) as err:
            ExperimentConfig.from_dict({"experiment": {"trials": 0, "alpha": 2.0, "gate": "cnot"}})
        assert len(err.value.issues) == 3

    def test_model_spelling(self):
        config = ExperimentConfig.from_dict({"experiment": {"protocol_model": "ippm-true"}})
        assert config.protocol_model == "ippm_true"

    def test_missing_file(self, tmp_path):
        with pytest.raises(RecordIOError, match="Config file not found"):
            ExperimentConfig.from_yaml(tmp_path / "absent.yaml")

    def test_overrides(self):
        config = ExperimentConfig.from_dict({}).with_overrides(seed=9, alpha=0.01)
        assert (config.seed, config.alpha) == (9, 0.01)
        with pytest.raises(ConfigError, match="alpha"):
            config.with_overrides(alpha=0.0)


class TestGateSpec:

    def test_rotation(self):
        gate = GateSpec.from_dict({"name": "rotation", "theta": 3.141592653589793, "axis": [1, 0, 0]})
        assert gate.build(1).is_unitary()

    def test_rotation_needs_axis(self):
        assert GateSpec(name="rotation", theta=1.0).validate(1) == ["experiment.gate.axis: must be a unit 3-vector"]

    def test_custom_gate(self, rng):
        k = random_kraus(2, 2, rng)
        gate = GateSpec.from_dict(GateSpec.from_kraus(k).to_dict())
        assert np.allclose(kraus_to_chi(gate.build(1)).matrix, kraus_to_chi(k).matrix)

    def test_custom_gate_must_be_trace_preserving(self):
        half = encode_matrix(0.5 * np.eye(2))
        assert any("not trace-preserving" in issue for issue in GateSpec(name="custom", kraus=(half,)).validate(1))

    def test_unknown_gate(self):
        with pytest.raises(ConfigError, match="unknown gate 'toffoli'"):
            GateSpec.from_dict("toffoli").build(1)


class TestHardwareDemo:

    def test_standard_identity_fidelity_in_band(self):
        config = ExperimentConfig.from_yaml(ROOT / "configs" / "hardware_demo.yaml")
        cube = cube_protocol(config.n_qubits)
        rec = exact_counts(config.true_gate(), config.scenario, cube, config.n_per_scheme)
        selection = select_rank(rec, cube, config.alpha, config.solver)
        fidelity = process_fidelity(selection.chi, kraus_to_chi(config.true_gate()))
        assert 0.85 <= fidelity <= 0.92
