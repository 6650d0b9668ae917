import csv

import numpy as np
import pytest
import yaml

from arcmix import harness
from arcmix.errors import ArcmixIOError, InvalidConfigError
from arcmix.harness import ExperimentConfig
from arcmix.metrics import ece_from_bins, evaluate
from arcmix.nn import softmax
from arcmix.streams import derive_seed
from arcmix.training import train

TINY = dict(n_samples=200, epochs=2, hidden_sizes=[6], batch_size=32)


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return path


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert c.method == "baseline" and c.arc.bins == "single" and c.num_eval_bins == 15

    def test_from_dict_nested(self):
        c = ExperimentConfig.from_dict({"method": "arc", "arc": {"variant": "v2", "arc_weight": 2}})
        assert c.arc.variant == "v2" and c.arc.arc_weight == 2

    @pytest.mark.parametrize("raw", [{"lr": 0.1}, {"arc": {"weight": 1}}, {"method": "mmce"}, {"epochs": 0}, {"beta_mix": 0}])
    def test_rejected(self, raw):
        with pytest.raises(InvalidConfigError):
            ExperimentConfig.from_dict(raw)

    def test_replace_merges_arc(self):
        c = ExperimentConfig(arc={"variant": "v2"}).replace(arc={"arc_weight": 4.0})
        assert (c.arc.variant, c.arc.arc_weight) == ("v2", 4.0)

    def test_load_config(self, tmp_path):
        c = harness.load_config(write_yaml(tmp_path / "c.yaml", {"method": "arc_mixup", "seed": 9}))
        assert c.method == "arc_mixup" and c.seed == 9

    def test_load_missing(self, tmp_path):
        with pytest.raises(ArcmixIOError):
            harness.load_config(tmp_path / "none.yaml")

    def test_load_malformed(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("method: [unclosed\n")
        with pytest.raises(InvalidConfigError):
            harness.load_config(p)


class TestGrid:
    def test_cartesian_and_seeds(self, tmp_path):
        p = write_yaml(
            tmp_path / "g.yaml",
            {"defaults": TINY, "sweep": {"method": ["baseline", "arc"], "arc.arc_weight": [1.0, 2.0, 4.0]}, "seed": 7},
        )
        configs = harness.load_grid(p)
        assert len(configs) == 6
        assert [c.seed for c in configs] == [derive_seed(7, i) for i in range(6)]
        assert {c.arc.arc_weight for c in configs} == {1.0, 2.0, 4.0}

    def test_master_seed_override(self, tmp_path):
        p = write_yaml(tmp_path / "g.yaml", {"defaults": TINY, "seed": 7})
        assert harness.load_grid(p, master_seed=8)[0].seed == derive_seed(8, 0)

    def test_explicit_runs(self):
        configs = harness.expand_grid(TINY, runs=[{"method": "baseline", "seed": 1}, {"method": "arc"}])
        assert configs[0].seed == 1
        assert configs[1].seed == derive_seed(0, 1)

    def test_unknown_grid_key(self, tmp_path):
        with pytest.raises(InvalidConfigError):
            harness.load_grid(write_yaml(tmp_path / "g.yaml", {"defaults": TINY, "repeat": 3}))

    def test_unknown_run_key(self):
        with pytest.raises(InvalidConfigError):
            harness.expand_grid(TINY, runs=[{"metod": "arc"}])

    def test_grid_of_one_matches_train(self):
        cfg = ExperimentConfig(**TINY, seed=5)
        [r] = harness.run_grid([cfg])
        direct = train(cfg, harness.prepare_data(cfg))
        assert r.test.ece == direct.test.ece and r.curves == direct.curves

    def test_parallel_matches_serial(self):
        configs = harness.expand_grid(TINY, sweep={"method": ["baseline", "arc_mixup"]}, runs=[{}, {"dataset": "ring8"}], master_seed=2)
        a = harness.run_grid(configs, parallelism=1)
        b = harness.run_grid(configs, parallelism=4)
        for x, y in zip(a, b):
            assert harness.result_row(x, False) == harness.result_row(y, False)

    def test_failure_is_isolated(self):
        good = ExperimentConfig(**TINY, seed=1)
        bad = good.replace(learning_rate=1e8, momentum=0.0, epochs=10)
        results = harness.run_grid([good, bad, good], parallelism=2)
        assert [r.ok for r in results] == [True, False, True]
        assert results[1].error_type == "TrainingDivergedError"
        assert results[0].test.ece == results[2].test.ece

    def test_empty_grid(self):
        with pytest.raises(InvalidConfigError):
            harness.run_grid([])


class TestData:
    def test_same_seed_same_data_across_methods(self):
        a = harness.prepare_data(ExperimentConfig(**TINY, seed=4))
        b = harness.prepare_data(ExperimentConfig(**TINY, seed=4, method="arc_mixup"))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.inputs, y.inputs)

    def test_csv_dataset(self, tmp_path):
        rows = "\n".join(f"{i * 0.1},{(i % 3) * 1.0},{i % 2}" for i in range(50))
        (tmp_path / "d.csv").write_text("a,b,label\n" + rows + "\n")
        train_set, val, test = harness.prepare_data(ExperimentConfig(**TINY, dataset=str(tmp_path / "d.csv")))
        assert len(train_set) + len(val) + len(test) == 50

    def test_unknown_dataset(self):
        with pytest.raises(InvalidConfigError):
            harness.prepare_data(ExperimentConfig(**TINY, dataset="no_such_thing"))


class TestExport:
    def run(self, seed=0, **kw):
        cfg = ExperimentConfig(**{**TINY, **kw}, seed=seed)
        return train(cfg, harness.prepare_data(cfg))

    def test_empty_results_header_only(self, tmp_path):
        harness.export_results([], tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text() == ",".join(harness.RESULT_COLUMNS) + "\n"

    def test_round_trip_and_aggregate(self, tmp_path):
        runs = [self.run(0), self.run(1)]
        harness.export_results(runs, tmp_path / "r.csv")
        lines = (tmp_path / "r.csv").read_text().splitlines()
        assert len(lines) == 3
        rows = harness.read_results(tmp_path / "r.csv")
        summary = harness.aggregate(rows)[("overlap2d", "baseline")]
        assert summary["n"] == 2
        assert summary["ece"] == pytest.approx(np.mean([r.test.ece for r in runs]), abs=1e-9)
        assert summary["acc"] == pytest.approx(np.mean([r.test.accuracy for r in runs]), abs=1e-9)

    def test_failed_run_row(self, tmp_path):
        bad = harness.run_one(ExperimentConfig(**{**TINY, "epochs": 10}, learning_rate=1e8, momentum=0.0))
        harness.export_results([bad], tmp_path / "r.csv")
        [row] = harness.read_results(tmp_path / "r.csv")
        assert row["method"] == "baseline" and row["acc"] == "" and row["ece"] == ""
        assert harness.aggregate([row]) == {}

    def test_reliability_file(self, tmp_path):
        rng = np.random.default_rng(0)
        probs = softmax(rng.normal(scale=0.3, size=(40, 3)))
        labels = rng.integers(0, 3, 40)
        rep = evaluate(probs, labels, 15)
        harness.export_reliability(rep, tmp_path / "rel.tsv")
        with open(tmp_path / "rel.tsv", newline="") as fh:
            rows = list(csv.DictReader(fh, delimiter="\t"))
        assert len(rows) == 15
        empty = [r for r in rows if r["count"] == "0"]
        assert empty and all(r["mean_confidence"] == "" and r["accuracy"] == "" for r in empty)
        bins = harness.read_reliability(tmp_path / "rel.tsv")
        assert ece_from_bins(bins) == pytest.approx(rep.ece, abs=1e-12)

    def test_write_failure(self, tmp_path):
        with pytest.raises(ArcmixIOError):
            harness.export_results([], tmp_path / "missing_dir" / "r.csv")


class TestSweep:
    def test_one_row_per_weight(self, tmp_path):
        cfg = ExperimentConfig(**TINY, seed=2)
        results = harness.sweep_arc_weight(cfg, weights=(0.5, 2.0))
        rows = harness.sweep_rows(results)
        assert [r["arc_weight"] for r in rows] == [0.5, 2.0]
        assert all(r.config.method == "arc_on_validation" for r in results)
        harness.export_sweep(results, tmp_path / "s.csv")
        assert len((tmp_path / "s.csv").read_text().splitlines()) == 3
