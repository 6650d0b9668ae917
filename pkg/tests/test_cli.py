import subprocess
import sys

import numpy as np
import pytest
import yaml

from arcmix.cli import main
from arcmix.harness import read_reliability, read_results
from arcmix.metrics import ece_from_bins

TINY = {"n_samples": 200, "epochs": 2, "hidden_sizes": [6], "batch_size": 32}


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({**TINY, "method": "arc_mixup"}))
    return p


@pytest.fixture
def grid(tmp_path):
    p = tmp_path / "g.yaml"
    p.write_text(yaml.safe_dump({"defaults": TINY, "sweep": {"method": ["baseline", "baseline_mixup", "arc_on_validation"]}}))
    return p


class TestGenData:
    def test_writes_csv(self, tmp_path, capsys):
        assert main(["gen-data", "ring8", "--n", "64", "--seed", "3", "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "ring8.csv").read_text().splitlines()
        assert lines[0] == "f1,f2,label" and len(lines) == 65
        assert "64 samples" in capsys.readouterr().out

    def test_unknown_spec(self, tmp_path):
        assert main(["gen-data", "moons", "--out", str(tmp_path)]) == 1


class TestTrain:
    def test_outputs(self, tmp_path, config, capsys):
        out = tmp_path / "run"
        assert main(["train", str(config), "--seed", "4", "--bins", "10", "--out", str(out)]) == 0
        for name in ("results.csv", "reliability_test.tsv", "reliability_val.tsv", "curves.csv", "config.yaml"):
            assert (out / name).exists()
        [row] = read_results(out / "results.csv")
        assert row["method"] == "arc_mixup" and row["seed"] == "4"
        bins = read_reliability(out / "reliability_test.tsv")
        assert len(bins) == 10
        assert ece_from_bins(bins) == pytest.approx(float(row["ece"]), abs=1e-12)
        assert len((out / "curves.csv").read_text().splitlines()) == 3
        assert yaml.safe_load((out / "config.yaml").read_text())["num_eval_bins"] == 10
        assert "test" in capsys.readouterr().out

    def test_unknown_key_exit_1(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("epochz: 3\n")
        assert main(["train", str(p), "--out", str(tmp_path)]) == 1

    def test_missing_config_exit_3(self, tmp_path):
        assert main(["train", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 3

    def test_divergence_exit_2(self, tmp_path):
        p = tmp_path / "hot.yaml"
        p.write_text(yaml.safe_dump({**TINY, "epochs": 10, "learning_rate": 1e8, "momentum": 0.0}))
        assert main(["train", str(p), "--out", str(tmp_path / "o")]) == 2


class TestGrid:
    def test_outputs(self, tmp_path, grid):
        out = tmp_path / "g"
        assert main(["grid", str(grid), "--seed", "1", "--out", str(out)]) == 0
        rows = read_results(out / "results.csv")
        assert [r["method"] for r in rows] == ["baseline", "baseline_mixup", "arc_on_validation"]
        assert all(r["wall_time_s"] == "" for r in rows)
        assert len((out / "timings.csv").read_text().splitlines()) == 4
        assert len((out / "sweep.csv").read_text().splitlines()) == 2

    def test_byte_identical_across_parallelism(self, tmp_path, grid):
        main(["grid", str(grid), "--seed", "5", "--parallel", "1", "--out", str(tmp_path / "a")])
        main(["grid", str(grid), "--seed", "5", "--parallel", "3", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()

    def test_wall_time_flag(self, tmp_path, grid):
        main(["grid", str(grid), "--wall-time", "--out", str(tmp_path)])
        assert all(r["wall_time_s"] for r in read_results(tmp_path / "results.csv"))

    def test_divergent_run_exit_2(self, tmp_path):
        p = tmp_path / "g.yaml"
        p.write_text(yaml.safe_dump({"defaults": {**TINY, "epochs": 10, "momentum": 0.0}, "sweep": {"learning_rate": [0.1, 1e8]}}))
        assert main(["grid", str(p), "--out", str(tmp_path / "o")]) == 2
        rows = read_results(tmp_path / "o" / "results.csv")
        assert rows[0]["acc"] and not rows[1]["acc"]


class TestEval:
    def write_preds(self, path, probs, labels):
        with open(path, "w") as fh:
            fh.write(",".join(f"p{k}" for k in range(probs.shape[1])) + ",label\n")
            for p, y in zip(probs, labels):
                fh.write(",".join(repr(float(v)) for v in p) + f",{y}\n")
        return path

    def test_metrics(self, tmp_path, capsys):
        probs = np.array([[0.9, 0.1], [0.9, 0.1], [0.6, 0.4], [0.4, 0.6]])
        # confidences 0.9, 0.9, 0.6, 0.6 with hits 1, 0, 1, 0; all in the upper bin
        p = self.write_preds(tmp_path / "p.csv", probs, [0, 1, 0, 0])
        assert main(["eval", str(p), "--bins", "2", "--out", str(tmp_path / "e")]) == 0
        [row] = read_results(tmp_path / "e" / "metrics.csv")
        assert float(row["ece"]) == pytest.approx(0.25, abs=1e-12)
        assert float(row["acc"]) == 0.5
        assert len(read_reliability(tmp_path / "e" / "reliability.tsv")) == 2
        assert "ece" in capsys.readouterr().out

    def test_rows_must_sum_to_one(self, tmp_path):
        p = self.write_preds(tmp_path / "p.csv", np.array([[0.5, 0.6]]), [0])
        assert main(["eval", str(p)]) == 1

    def test_ragged_exit_1(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        p.write_text("0.5,0.5,0\n0.5,1\n")
        assert main(["eval", str(p)]) == 1
        assert "line 2" in capsys.readouterr().err


class TestReport:
    def test_table(self, tmp_path, grid, capsys):
        main(["grid", str(grid), "--out", str(tmp_path / "g")])
        capsys.readouterr()
        assert main(["report", str(tmp_path / "g" / "results.csv"), "--out", str(tmp_path / "r")]) == 0
        out = capsys.readouterr().out
        assert "Baseline + Mixup (B+M)" in out and "ACC" in out
        summary = read_results(tmp_path / "r" / "summary.csv")
        assert {r["method"] for r in summary} == {"baseline", "baseline_mixup", "arc_on_validation"}

    def test_missing_file_exit_3(self, tmp_path):
        assert main(["report", str(tmp_path / "none.csv")]) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "arcmix", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("gen-data", "train", "grid", "eval", "report"):
        assert cmd in proc.stdout
