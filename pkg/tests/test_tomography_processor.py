"""End-to-end tests for TomographyProcessor and the run.py command line"""
from pathlib import Path

import pandas as pd
import pytest
import yaml

import run
from backend.experiment import ExperimentConfig
from backend.record_io import read_calibration, read_counts, read_result
from backend.tomography_processor import TomographyProcessor, exit_code_for, expand_paths, infer_qubits, trial_seeds
from backend.errors import ConfigError, NonPhysicalError, RecordIOError

SPAM = {
    "init_noise": {"kind": "depolarizing", "gamma": 0.01},
    "prep_noise": {"kind": "composite", "children": [
        {"kind": "amplitude_damping", "t1": 100.0},
        {"kind": "dephasing", "t1": 100.0, "t2": 50.0},
    ]},
    "meas_noise": {"kind": "amplitude_damping", "t1": 20.0},
}


def make_config(gate="hadamard", exact=True, trials=1, scenario=None, seed=3, **solver):
    return ExperimentConfig.from_dict({
        "experiment": {"gate": gate, "n_per_scheme": 1000, "trials": trials, "seed": seed, "exact": exact},
        "scenario": scenario or {},
        "solver": {"raise_on_nonconvergence": False, "max_iterations": 5000, **solver},
    })


@pytest.fixture
def processor(tmp_path):
    return TomographyProcessor(output_dir=str(tmp_path / "exports"))


class TestHelpers:

    def test_trial_seeds_are_reproducible(self):
        assert trial_seeds(7, 4) == trial_seeds(7, 4)
        assert len(set(trial_seeds(7, 4))) == 4
        assert trial_seeds(7, 4) != trial_seeds(8, 4)

    @pytest.mark.parametrize("error,code", [
        (ConfigError("bad"), 2),
        (NonPhysicalError("bad"), 3),
        (RecordIOError("bad"), 4),
        (ValueError("bad"), 2),
        (FileNotFoundError("bad"), 4),
        (RuntimeError("bad"), 1),
    ])
    def test_exit_codes(self, error, code):
        assert exit_code_for(error) == code

    def test_expand_directory(self, tmp_path):
        (tmp_path / "a").mkdir()
        for name in ("a/x.csv", "y.csv", "z.yaml"):
            (tmp_path / name).write_text("")
        assert [Path(p).name for p in expand_paths(str(tmp_path), ".csv")] == ["x.csv", "y.csv"]


class TestSimulate:

    def test_writes_protocol_and_counts(self, tmp_path, processor):
        result = processor.cmd_simulate(make_config(exact=False, trials=2), str(tmp_path / "sim"))
        assert result['success']
        assert len(result['files']) == 2
        rec = read_counts(result['files'][0])
        assert len(rec) == 36
        assert infer_qubits(rec) == 1
        assert rec.metadata["gate"] == {"name": "hadamard"}
        assert (tmp_path / "sim" / "protocol.yaml").exists()

    def test_same_seed_same_files(self, tmp_path, processor):
        config = make_config(exact=False, trials=2)
        a = processor.cmd_simulate(config, str(tmp_path / "a"))
        b = processor.cmd_simulate(config, str(tmp_path / "b"))
        for left, right in zip(a['files'], b['files']):
            assert Path(left).read_text() == Path(right).read_text()

    def test_trials_get_different_seeds(self, tmp_path, processor):
        result = processor.cmd_simulate(make_config(exact=False, trials=2), str(tmp_path / "sim"))
        first, second = (read_counts(path) for path in result['files'])
        assert first.seed != second.seed


class TestPipeline:

    def test_calibrate_empty_gate(self, tmp_path, processor):
        sim = processor.cmd_simulate(make_config(gate="identity"), str(tmp_path / "empty"))
        result = processor.cmd_calibrate(sim['files'][0], str(tmp_path / "cal.yaml"))
        assert result['success'], result.get('error')
        assert result['rank'] == 1
        assert result['estimable']
        assert result['fidelity_identity'] >= 1 - 1e-6
        chi, kraus, summary = read_calibration(result['calibration_file'])
        assert chi.dim == 2
        assert kraus.rank == 1
        assert summary["ladder"][0]["dof"] == 9

    def test_reconstruct_and_report(self, tmp_path, processor):
        sim = processor.cmd_simulate(make_config(), str(tmp_path / "had"))
        result = processor.cmd_reconstruct(sim['files'], "standard", out_path=str(tmp_path / "results"))
        assert result['success'], result.get('error')
        data = read_result(result['files'][0])
        assert data["protocol_model"] == "standard"
        assert data["chosen_rank"] == 1
        assert data["fidelity"] >= 1 - 1e-6
        assert data["trace_residual"] <= 5e-3

        report = processor.cmd_report(str(tmp_path / "results"), fmt="csv", out_path=str(tmp_path / "report"))
        assert report['success'], report.get('error')
        fidelity = pd.read_csv(report['files']['fidelity'])
        assert list(fidelity.columns) == ["protocol_model", "n", "trials", "mean", "q1", "median", "q3"]
        pauli = pd.read_csv(report['files']['pauli_standard_n1000_real'], index_col=0)
        assert list(pauli.columns) == ["I", "X", "Y", "Z"]
        assert pauli.loc["X", "Z"] == pytest.approx(1.0, abs=1e-4)

    def test_structured_report(self, tmp_path, processor):
        sim = processor.cmd_simulate(make_config(), str(tmp_path / "had"))
        processor.cmd_reconstruct(sim['files'], "standard", out_path=str(tmp_path / "results"))
        report = processor.cmd_report(str(tmp_path / "results"), fmt="structured", out_path=str(tmp_path / "rep"))
        with open(report['files']['structured'], encoding="utf-8") as f:
            document = yaml.safe_load(f)
        assert document["kind"] == "report"
        assert document["fidelity"][0]["trials"] == 1

    def test_calibrated_model_beats_standard(self, tmp_path, processor):
        empty = processor.cmd_simulate(make_config(gate="identity", scenario=SPAM), str(tmp_path / "empty"))
        cal = processor.cmd_calibrate(empty['files'][0], str(tmp_path / "cal.yaml"), opts=make_config().solver)
        assert cal['success'], cal.get('error')

        config = make_config(scenario=SPAM)
        sim = processor.cmd_simulate(config, str(tmp_path / "had"))
        out = str(tmp_path / "results")
        results = {}
        for model in ("standard", "gn", "ng", "ippm-true"):
            result = processor.cmd_reconstruct(sim['files'], model, out_path=out, config=config,
                                               calibration_path=cal['calibration_file'])
            assert result['success'], result.get('error')
            results[model] = read_result(result['files'][0])
        assert results["ippm-true"]["chosen_rank"] == 1
        assert results["ippm-true"]["fidelity"] >= 1 - 1e-6
        for model in ("gn", "ng", "ippm-true"):
            assert results[model]["fidelity"] > results["standard"]["fidelity"]
        assert results["ng"]["protocol_model"] == "ng"
        assert (tmp_path / "results" / "ippm_true").is_dir()

    def test_gn_needs_calibration(self, tmp_path, processor):
        sim = processor.cmd_simulate(make_config(), str(tmp_path / "had"))
        result = processor.cmd_reconstruct(sim['files'], "gn")
        assert not result['success']
        assert result['exit_code'] == 2
        assert result['error_type'] == "ConfigError"

    def test_unknown_model(self, processor):
        result = processor.cmd_reconstruct([], "tomography")
        assert result['exit_code'] == 2

    def test_no_counts_matched(self, tmp_path, processor):
        result = processor.cmd_reconstruct(str(tmp_path / "*.csv"), "standard")
        assert not result['success']
        assert result['exit_code'] == 4

    def test_report_without_results(self, tmp_path, processor):
        result = processor.cmd_report(str(tmp_path), out_path=str(tmp_path / "rep"))
        assert result['exit_code'] == 4


class TestCommandLine:

    def write_config(self, tmp_path, data):
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(data))
        return str(path)

    def test_simulate_and_reconstruct(self, tmp_path, capsys):
        config = self.write_config(tmp_path, {"experiment": {"gate": "x", "exact": True, "n_per_scheme": 500}})
        run.main(["simulate", "--config", config, "--out", str(tmp_path / "sim")])
        run.main(["reconstruct", "--counts", str(tmp_path / "sim" / "counts"), "--model", "standard",
                  "--rank", "1", "--out", str(tmp_path / "results")])
        out = capsys.readouterr().out
        assert "Simulation complete" in out
        assert "Reconstructed 1 count file(s)" in out
        assert (tmp_path / "results" / "standard" / "n500_trial0000.yaml").exists()

    def test_invalid_config_exits_with_2(self, tmp_path):
        config = self.write_config(tmp_path, {"experiment": {"gate": "toffoli"}})
        with pytest.raises(SystemExit) as err:
            run.main(["simulate", "--config", config, "--out", str(tmp_path / "sim")])
        assert err.value.code == 2

    def test_missing_config_exits_with_4(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            run.main(["simulate", "--config", str(tmp_path / "absent.yaml")])
        assert err.value.code == 4

    def test_bad_rank_is_a_usage_error(self):
        with pytest.raises(SystemExit) as err:
            run.main(["reconstruct", "--counts", "x.csv", "--rank", "zero"])
        assert err.value.code == 2
