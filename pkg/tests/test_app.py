import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import app
from config import DATASET_FILE
from errors import ConfigError, TrainingAbortedError
from synthdomains import DomainSpec, generate, load_dataset, load_spec


@pytest.fixture
def small_dataset(mocker):
    dataset = generate(DomainSpec(num_classes=3, feature_dim=8, samples_per_class=10, seed=0))
    mocker.patch("app._dataset_for", return_value=dataset)
    return dataset


class TestParser:
    """Test cases for argument parsing"""
    
    def test_seeds_list(self):
        args = app.build_parser().parse_args(["ablate", "--seeds", "0,1,2"])
        assert args.seeds == [0, 1, 2]
    
    def test_bad_seeds(self):
        with pytest.raises(SystemExit):
            app.build_parser().parse_args(["ablate", "--seeds", "a,b"])
    
    def test_command_required(self):
        with pytest.raises(SystemExit):
            app.build_parser().parse_args([])


class TestCommands:
    """Test cases for the subcommands and their exit codes"""
    
    def test_gen_data(self, tmp_path):
        code = app.main(["gen-data", "--out", str(tmp_path), "--seed", "3", "--negative-fraction", "0.1"])
        assert code == 0
        assert (tmp_path / DATASET_FILE).exists()
    
    def test_gen_data_unknown_scenario(self, tmp_path):
        assert app.main(["gen-data", "--out", str(tmp_path), "--scenario", "nowhere"]) == 1
    
    def test_gen_data_from_spec_file(self, tmp_path):
        """Test --spec feeds a YAML mapping into the generator"""
        spec_file = tmp_path / "spec.yaml"
        spec_file.write_text("num_classes: 3\nfeature_dim: 8\nsamples_per_class: 5\nseed: 9\n", encoding="utf-8")
        assert app.main(["gen-data", "--out", str(tmp_path / "data"), "--spec", str(spec_file)]) == 0
        loaded = load_dataset(tmp_path / "data")
        assert loaded.spec.num_classes == 3 and loaded.spec.seed == 9
        assert len(loaded.source) == 15
    
    def test_gen_data_spec_json_with_seed_override(self, tmp_path):
        """Test a JSON spec file with --seed on top"""
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps({"num_classes": 3, "feature_dim": 8, "samples_per_class": 5}), encoding="utf-8")
        assert app.main(["gen-data", "--out", str(tmp_path), "--spec", str(spec_file), "--seed", "4"]) == 0
        assert load_dataset(tmp_path).spec.seed == 4
    
    def test_load_spec_unknown_key(self, tmp_path):
        """Test a misspelled key in a spec file is a ConfigError"""
        spec_file = tmp_path / "spec.yaml"
        spec_file.write_text("num_classes: 3\nshfit: 2.0\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_spec(spec_file)
        assert app.main(["gen-data", "--out", str(tmp_path), "--spec", str(spec_file)]) == 1
    
    def test_gen_data_spec_and_scenario_exclusive(self, tmp_path):
        spec_file = tmp_path / "spec.yaml"
        spec_file.write_text("num_classes: 3\n", encoding="utf-8")
        assert app.main(["gen-data", "--out", str(tmp_path), "--spec", str(spec_file), "--scenario", "D1_D2"]) == 1
    
    def test_train_passes_overrides(self, tmp_path, mocker, small_dataset):
        summary = mocker.MagicMock(final_accuracy=0.5)
        run = mocker.patch("app.run_training", return_value=summary)
        assert app.main(["train", "--mode", "source_only", "--seed", "4", "--out", str(tmp_path)]) == 0
        config, dataset, out = run.call_args.args
        assert config.mode.value == "source_only"
        assert config.seed == 4
        assert dataset is small_dataset
        assert out == tmp_path
    
    def test_train_invalid_config(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("stage2_batch: 81\n", encoding="utf-8")
        assert app.main(["train", "--config", str(path)]) == 1
    
    def test_train_aborted(self, mocker, small_dataset):
        mocker.patch("app.run_training", side_effect=TrainingAbortedError("nan", checkpoint_path=Path("x.npz")))
        assert app.main(["train"]) == 1
    
    def test_interrupted(self, mocker, small_dataset):
        mocker.patch("app.run_training", side_effect=KeyboardInterrupt)
        assert app.main(["train"]) == 130
    
    def test_ablate_too_few_seeds(self, small_dataset, tmp_path):
        assert app.main(["ablate", "--seeds", "0,1", "--out", str(tmp_path)]) == 1
    
    def test_ablate_variants(self, mocker, small_dataset, tmp_path):
        suite = mocker.patch("app.run_ablation_suite", return_value=[])
        code = app.main(["ablate", "--seeds", "0,1,2", "--out", str(tmp_path), "--variants", "source_only, random_ir"])
        assert code == 0
        assert suite.call_args.kwargs["variants"] == ["source_only", "random_ir"]
        assert suite.call_args.args[2] == [0, 1, 2]
    
    def test_report_missing_runs(self, tmp_path):
        assert app.main(["report", "--runs", str(tmp_path / "none")]) == 1
    
    def test_report_config_error_exit(self, mocker):
        mocker.patch("app.summarize", side_effect=ConfigError("bad"))
        assert app.main(["report"]) == 1
    
    def test_selection_report_missing_dump(self, tmp_path):
        app.main(["gen-data", "--out", str(tmp_path)])
        assert app.main(["selection-report", "--dump", str(tmp_path / "masks.csv"), "--data", str(tmp_path)]) == 1
