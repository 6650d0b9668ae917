"""Experiment configuration, data preparation, grid execution and export."""

import csv
import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from .datasets import SplitSpec, get_spec, load_csv, sample_dataset, split, SPECS
from .errors import ArcmixIOError, InvalidConfigError
from .losses import ArcConfig
from .streams import derive_seed, run_streams
from .training import METHODS, failed_result, train

RESULT_COLUMNS = ("method", "dataset", "seed", "acc", "ece", "mce", "brier", "nll", "epochs", "wall_time_s")
RELIABILITY_COLUMNS = ("bin_low", "bin_high", "count", "mean_confidence", "accuracy")
SWEEP_COLUMNS = ("arc_weight", "seed", "val_acc", "val_ece", "test_acc", "test_ece")


@dataclass
class ExperimentConfig:
    method: str = "baseline"
    dataset: str = "overlap2d"
    n_samples: int = 3000
    split: dict = field(default_factory=lambda: {"train": 0.6, "val": 0.2, "test": 0.2})
    hidden_sizes: list = field(default_factory=lambda: [64, 64])
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 0.1
    lr_decay: float = 0.1
    lr_milestones: list = field(default_factory=lambda: [100, 150])
    momentum: float = 0.9
    weight_decay: float = 5e-4
    beta_mix: float = 1.0
    arc: ArcConfig = field(default_factory=ArcConfig)
    num_eval_bins: int = 15
    seed: int = 0
    # debug switch: drop the CE term and train on ARC alone
    arc_only: bool = False

    def __post_init__(self):
        if isinstance(self.arc, dict):
            self.arc = _build(ArcConfig, self.arc, "arc.")
        if self.method not in METHODS:
            raise InvalidConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("n_samples", "epochs", "batch_size", "num_eval_bins"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfigError(f"{name} must be a positive integer")
        if any(int(h) < 1 for h in self.hidden_sizes):
            raise InvalidConfigError("hidden_sizes must be positive")
        if not self.learning_rate > 0:
            raise InvalidConfigError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise InvalidConfigError("momentum must lie in [0, 1)")
        if not self.weight_decay >= 0:
            raise InvalidConfigError("weight_decay must be nonnegative")
        if not self.beta_mix > 0:
            raise InvalidConfigError("beta_mix must be positive")
        SplitSpec(**{**self.split, "seed": 0})

    def replace(self, **changes):
        if "arc" in changes and isinstance(changes["arc"], dict):
            changes["arc"] = dataclasses.replace(self.arc, **changes["arc"])
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw):
        return _build(cls, raw, "")


def _build(cls, raw, prefix):
    if not isinstance(raw, dict):
        raise InvalidConfigError(f"{prefix or 'config'} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {', '.join(prefix + k for k in unknown)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from None


def _read_yaml(path):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ArcmixIOError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from None
    return raw or {}


def load_config(path):
    return ExperimentConfig.from_dict(_read_yaml(path))


def _merge(base, override):
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_grid(path, master_seed=None):
    """Read a grid file and expand it into a list of configs.

    The file has an optional ``defaults`` mapping, an optional ``sweep``
    mapping of key -> list of values (cartesian product, keys may be dotted
    such as ``arc.arc_weight``), an optional explicit ``runs`` list, and an
    optional ``seed`` (master seed).  Runs without an explicit ``seed`` get
    one derived from the master seed and their position in the grid.
    """
    raw = _read_yaml(path)
    unknown = set(raw) - {"defaults", "sweep", "runs", "seed"}
    if unknown:
        raise InvalidConfigError(f"unknown grid keys: {', '.join(sorted(unknown))}")
    if master_seed is None:
        master_seed = raw.get("seed", 0)
    return expand_grid(raw.get("defaults", {}), raw.get("sweep", {}), raw.get("runs"), master_seed)


def _set_dotted(d, key, value):
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def expand_grid(defaults=None, sweep=None, runs=None, master_seed=0):
    defaults = defaults or {}
    combos = [{}]
    for key, values in (sweep or {}).items():
        if not isinstance(values, list) or not values:
            raise InvalidConfigError(f"sweep.{key} must be a nonempty list")
        combos = [{**c, key: v} for c in combos for v in values]
    entries = []
    for run in runs if runs is not None else [{}]:
        for combo in combos:
            merged = _merge(defaults, run)
            for key, value in combo.items():
                _set_dotted(merged, key, value)
            entries.append(merged)
    configs = []
    for index, entry in enumerate(entries):
        if "seed" not in entry:
            entry = {**entry, "seed": derive_seed(master_seed, index)}
        configs.append(ExperimentConfig.from_dict(entry))
    if not configs:
        raise InvalidConfigError("grid is empty")
    return configs


def prepare_data(config):
    """``(train, val, test)`` for a config.

    Synthetic sets are drawn from the run's dedicated ``dataset`` stream, so
    runs that share a seed (e.g. different methods) see the same data.
    """
    streams = run_streams(config.seed)
    if config.dataset in SPECS:
        full = sample_dataset(get_spec(config.dataset), config.n_samples, streams["dataset"])
    elif os.path.exists(config.dataset):
        full = load_csv(config.dataset)
    else:
        raise InvalidConfigError(f"dataset {config.dataset!r} is neither a known spec nor an existing file")
    return split(full, SplitSpec(**config.split, seed=streams["dataset"]))


def run_one(config):
    """Train one config, turning any failure into a flagged :class:`RunResult`."""
    started = time.perf_counter()
    try:
        return train(config, prepare_data(config))
    except Exception as exc:  # noqa: BLE001 - a grid must survive any single run
        return failed_result(config, exc, time.perf_counter() - started)


def run_grid(configs, parallelism=1):
    """Run every config; output order follows input order.

    A failing run is recorded in its :class:`RunResult` and does not stop the
    others.  Each run owns its RNG streams, so results do not depend on
    ``parallelism``.
    """
    configs = list(configs)
    if not configs:
        raise InvalidConfigError("empty grid")
    if parallelism <= 1 or len(configs) == 1:
        results = [run_one(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(run_one, configs))
    for r in results:
        r.params = None
    return results


def _fmt(value):
    return "" if value is None else repr(float(value))


def result_row(result, include_wall_time=True):
    cfg = result.config
    rep = result.test
    row = {"method": cfg.method, "dataset": cfg.dataset, "seed": cfg.seed, "epochs": cfg.epochs}
    for col, attr in (("acc", "accuracy"), ("ece", "ece"), ("mce", "mce"), ("brier", "brier"), ("nll", "nll")):
        row[col] = _fmt(getattr(rep, attr)) if rep is not None else ""
    row["wall_time_s"] = f"{result.wall_time:.3f}" if include_wall_time else ""
    return row


def export_results(results, path, include_wall_time=True):
    """One CSV row per run; metrics are raw proportions.

    Failed runs keep their row with the metric fields left empty.  Pass
    ``include_wall_time=False`` for byte-reproducible output.
    """
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for r in results:
                writer.writerow(result_row(r, include_wall_time))
    except OSError as exc:
        raise ArcmixIOError(f"cannot write {path}: {exc}") from None


def export_reliability(report, path):
    """TSV with one row per bin (empty bins included, stats left blank)."""
    edges = report.edges
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(RELIABILITY_COLUMNS)
            for i, b in enumerate(report.bins):
                writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), b.count, _fmt(b.mean_confidence), _fmt(b.accuracy)])
    except OSError as exc:
        raise ArcmixIOError(f"cannot write {path}: {exc}") from None


def read_reliability(path):
    from .losses import BinStats

    bins = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh, delimiter="\t"):
            count = int(row["count"])
            if count == 0:
                bins.append(BinStats(0, None, None))
            else:
                bins.append(BinStats(count, float(row["mean_confidence"]), float(row["accuracy"])))
    return bins


def read_results(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate(rows, metrics=("acc", "ece", "mce", "brier", "nll")):
    """Mean, standard deviation and run count per ``(dataset, method)``.

    Rows with empty metric fields (failed runs) are skipped.
    """
    groups = {}
    for row in rows:
        if not row.get("acc"):
            continue
        groups.setdefault((row["dataset"], row["method"]), []).append(row)
    out = {}
    for key, members in groups.items():
        stats = {"n": len(members)}
        for m in metrics:
            values = np.array([float(r[m]) for r in members])
            stats[m] = float(values.mean())
            stats[f"{m}_std"] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            stats[f"{m}_median"] = float(np.median(values))
        out[key] = stats
    return out


def sweep_arc_weight(config, weights=(0.5, 1, 2, 4, 8), parallelism=1):
    """Validation-set ARC runs, one per ARC weight."""
    configs = [config.replace(method="arc_on_validation", arc={"arc_weight": float(w)}) for w in weights]
    return run_grid(configs, parallelism)


def sweep_rows(results):
    rows = []
    for r in results:
        row = {"arc_weight": r.config.arc.arc_weight, "seed": r.config.seed}
        if r.ok:
            row.update(
                val_acc=r.validation.accuracy,
                val_ece=r.validation.ece,
                test_acc=r.test.accuracy,
                test_ece=r.test.ece,
            )
        rows.append(row)
    return rows


def export_sweep(results, path):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in sweep_rows(results):
                writer.writerow({k: (_fmt(v) if k not in ("seed",) else v) for k, v in row.items()})
    except OSError as exc:
        raise ArcmixIOError(f"cannot write {path}: {exc}") from None
