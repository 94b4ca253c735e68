import json
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import motif_dataset, write_tu_dir


def run_cli(*argv, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "metricvec.cli", *argv],
        capture_output=True, text=True, cwd=cwd,
    )


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    ds = motif_dataset(n_per_class=10)
    specs = [(list(g.node_labels), list(g.edges)) for g in ds.graphs]
    return write_tu_dir(root, "MOTIFS", specs, list(ds.labels))


FAST = ["--min-sup", "0.4", "--max-edges", "3", "--dim", "8", "--epochs", "40"]


class TestSubcommands:
    def test_mine_writes_fragments(self, data_dir, tmp_path):
        out = tmp_path / "out"
        res = run_cli("mine", "--data-dir", str(data_dir), *FAST, "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert (out / "fragments.txt").is_file()
        assert "frequent fragments" in res.stdout

    def test_cv_happy_path(self, data_dir, tmp_path):
        out = tmp_path / "out"
        res = run_cli(
            "cv", "--data-dir", str(data_dir), *FAST,
            "--classifier", "knn", "--k", "3", "--folds", "3",
            "--seed", "7", "--out", str(out),
        )
        assert res.returncode == 0, res.stderr
        assert (out / "report.json").is_file()
        assert (out / "summary.csv").is_file()
        assert (out / "cv_accuracy.png").is_file()
        payload = json.loads((out / "report.json").read_text())
        assert payload["aggregate"]["overall"]["mean"] >= 0.9

    def test_fewshot_cells(self, data_dir, tmp_path):
        out = tmp_path / "out"
        res = run_cli(
            "fewshot", "--data-dir", str(data_dir), *FAST,
            "--eta", "0.2,0.5", "--zeta", "0.2", "--repeats", "2",
            "--out", str(out),
        )
        assert res.returncode == 0, res.stderr
        assert "eta=0.2" in res.stdout and "eta=0.5" in res.stdout
        assert (out / "fewshot_accuracy.png").is_file()

    def test_sweep_and_drift(self, data_dir, tmp_path):
        out1 = tmp_path / "sweep"
        res = run_cli(
            "sweep", "--data-dir", str(data_dir), *FAST,
            "--thetas", "0.9,0.4", "--folds", "3", "--out", str(out1),
        )
        assert res.returncode == 0, res.stderr
        assert (out1 / "minsup_sweep.png").is_file()
        out2 = tmp_path / "drift"
        res = run_cli(
            "drift", "--data-dir", str(data_dir), *FAST,
            "--eta", "0.2,0.5", "--reference-eta", "0.8", "--repeats", "2",
            "--out", str(out2),
        )
        assert res.returncode == 0, res.stderr
        assert (out2 / "drift.png").is_file()

    def test_distances_and_metric_export(self, data_dir, tmp_path):
        out = tmp_path / "out"
        res = run_cli("distances", "--data-dir", str(data_dir), *FAST,
                      "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert (out / "distances.bin").is_file()
        assert (out / "distances.bin.json").is_file()
        res = run_cli("embed-metric", "--data-dir", str(data_dir), *FAST,
                      "--eta", "0.5", "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert (out / "metric_vectors.csv").is_file()

    def test_cache_list_and_clear(self, data_dir, tmp_path):
        out = tmp_path / "out"
        run_cli("distances", "--data-dir", str(data_dir), *FAST, "--out", str(out))
        res = run_cli("cache", "list", "--cache-dir", str(out))
        assert res.returncode == 0
        assert "distances.bin" in res.stdout
        res = run_cli("cache", "clear", "--cache-dir", str(out))
        assert res.returncode == 0
        assert not (out / "distances.bin").exists()


class TestExitCodes:
    def test_unknown_subcommand_usage_exit_2(self):
        res = run_cli("frobnicate")
        assert res.returncode == 2
        assert "usage" in res.stderr.lower()

    def test_unknown_flag_exit_2(self):
        res = run_cli("cv", "--no-such-flag")
        assert res.returncode == 2

    def test_folds_1_validation_exit_2(self, data_dir):
        res = run_cli("cv", "--data-dir", str(data_dir), "--folds", "1")
        assert res.returncode == 2
        assert "folds" in res.stderr

    def test_pipeline_failure_exit_1(self, tmp_path):
        missing = tmp_path / "NOPE"
        res = run_cli("cv", "--data-dir", str(missing), "--folds", "2")
        assert res.returncode == 1
        assert "failure" in res.stderr


class TestConfigPrecedence:
    @pytest.fixture()
    def config_file(self, tmp_path):
        cfg = {"min_sup": 0.4, "dim": 8, "epochs": 30, "folds": 3, "seed": 5,
               "max_edges": 3}
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_flag_overrides_config_overrides_default(self, data_dir, tmp_path,
                                                     config_file):
        out = tmp_path / "out"
        res = run_cli(
            "cv", "--config", str(config_file), "--data-dir", str(data_dir),
            "--folds", "4", "--out", str(out),
        )
        assert res.returncode == 0, res.stderr
        payload = json.loads((out / "report.json").read_text())
        params = payload["meta"]["params"]
        assert params["folds"] == 4  # flag wins over config (3)
        assert params["mining"]["theta"] == 0.4  # config wins over default (0.5)
        assert params["embed"]["dim"] == 8  # config wins over default (16)
        assert params["embed"]["negatives"] == 5  # default survives
        assert params["classifier"]["k"] == 3  # default survives

    def test_every_flag_has_config_equivalent(self, data_dir, tmp_path):
        # matrix check on a representative spread of keys
        cfg = {
            "min_sup": 0.4, "max_edges": 3, "dim": 9, "epochs": 25,
            "negatives": 4, "reg_lambda": 0.02, "sinkhorn_iters": 25,
            "classifier": "logreg", "k": 5, "zeta": 0.2, "repeats": 2,
            "seed": 11, "mine_on": "all", "threads": 2, "folds": 3,
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "out"
        res = run_cli("cv", "--config", str(path), "--data-dir", str(data_dir),
                      "--out", str(out))
        assert res.returncode == 0, res.stderr
        params = json.loads((out / "report.json").read_text())["meta"]["params"]
        assert params["mining"] == {"theta": 0.4, "max_edges": 3}
        assert params["embed"]["dim"] == 9
        assert params["embed"]["epochs"] == 25
        assert params["embed"]["negatives"] == 4
        assert params["sinkhorn"]["reg_lambda"] == 0.02
        assert params["sinkhorn"]["max_iters"] == 25
        assert params["classifier"]["kind"] == "logreg"
        assert params["classifier"]["k"] == 5
        assert params["zeta"] == 0.2
        assert params["seed"] == 11
