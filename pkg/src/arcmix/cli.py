"""Command-line entry point: ``arcmix {gen-data,train,grid,eval,report}``.

Exit codes: 0 success, 1 invalid config or input, 2 training divergence,
3 I/O failure.
"""

import argparse
import csv
import os
import sys

import numpy as np
import yaml

from . import harness
from .datasets import get_spec, load_csv, sample_dataset, save_csv
from .errors import ArcmixError, ArcmixIOError, InvalidInputError
from .metrics import DEFAULT_BINS, evaluate
from .streams import make_rng
from .training import METHODS

METHOD_LABELS = {
    "baseline": "Baseline (B)",
    "baseline_mixup": "Baseline + Mixup (B+M)",
    "arc": "ARC (A)",
    "arc_mixup": "ARC + Mixup (A+M)",
    "arc_on_validation": "ARC on validation",
}


def _out_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ArcmixIOError(f"cannot create {path}: {exc}") from None
    return path


def cmd_gen_data(args):
    data = sample_dataset(get_spec(args.spec), args.n, make_rng(args.seed))
    path = os.path.join(_out_dir(args.out), f"{args.name or args.spec}.csv")
    save_csv(data, path)
    print(f"wrote {len(data)} samples to {path}")
    return 0


def _apply_overrides(config, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.bins is not None:
        changes["num_eval_bins"] = args.bins
    return config.replace(**changes) if changes else config


def _print_report(label, report):
    print(
        f"{label:>10}: acc {report.accuracy:.4f}  ece {report.ece:.4f}  mce {report.mce:.4f}"
        f"  brier {report.brier:.4f}  nll {report.nll:.4f}"
    )


def _write_curves(result, path):
    names = [k for k, v in result.curves.items() if v is not None]
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", *names])
            for epoch in range(result.config.epochs):
                writer.writerow([epoch, *(repr(result.curves[n][epoch]) for n in names)])
    except OSError as exc:
        raise ArcmixIOError(f"cannot write {path}: {exc}") from None


def cmd_train(args):
    config = _apply_overrides(harness.load_config(args.config), args)
    result = harness.train(config, harness.prepare_data(config))
    out = _out_dir(args.out)
    harness.export_results([result], os.path.join(out, "results.csv"))
    harness.export_reliability(result.test, os.path.join(out, "reliability_test.tsv"))
    harness.export_reliability(result.validation, os.path.join(out, "reliability_val.tsv"))
    _write_curves(result, os.path.join(out, "curves.csv"))
    with open(os.path.join(out, "config.yaml"), "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)
    print(f"{config.method} on {config.dataset}, seed {config.seed}, {config.epochs} epochs ({result.wall_time:.1f}s)")
    _print_report("validation", result.validation)
    _print_report("test", result.test)
    return 0


def cmd_grid(args):
    configs = harness.load_grid(args.config, master_seed=args.seed)
    if args.bins is not None:
        configs = [c.replace(num_eval_bins=args.bins) for c in configs]
    results = harness.run_grid(configs, parallelism=args.parallel)
    out = _out_dir(args.out)
    harness.export_results(results, os.path.join(out, "results.csv"), include_wall_time=args.wall_time)
    try:
        with open(os.path.join(out, "timings.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["run", "method", "seed", "wall_time_s"])
            for i, r in enumerate(results):
                writer.writerow([i, r.config.method, r.config.seed, f"{r.wall_time:.3f}"])
    except OSError as exc:
        raise ArcmixIOError(f"cannot write timings: {exc}") from None
    sweep = [r for r in results if r.config.method == "arc_on_validation"]
    if sweep:
        harness.export_sweep(sweep, os.path.join(out, "sweep.csv"))
    failures = [(i, r) for i, r in enumerate(results) if not r.ok]
    print(f"{len(results) - len(failures)}/{len(results)} runs finished; results in {out}")
    for i, r in failures:
        print(f"run {i} ({r.config.method}, seed {r.config.seed}) failed: {r.error_type}: {r.error}", file=sys.stderr)
    if any(r.error_type == "TrainingDivergedError" for _, r in failures):
        return 2
    return 1 if failures else 0


def load_predictions(path):
    """Probability columns followed by an integer label column."""
    data = load_csv(path)
    probs = data.inputs
    if np.any(probs < 0) or not np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-6):
        raise InvalidInputError(f"{path}: every row must hold a probability vector summing to 1")
    if data.labels.max() >= probs.shape[1]:
        raise InvalidInputError(f"{path}: label exceeds the number of probability columns")
    return probs, data.labels


def cmd_eval(args):
    probs, labels = load_predictions(args.predictions)
    bins = args.bins if args.bins is not None else DEFAULT_BINS
    report = evaluate(probs, labels, bins)
    _print_report("metrics", report)
    if args.out:
        out = _out_dir(args.out)
        harness.export_reliability(report, os.path.join(out, "reliability.tsv"))
        try:
            with open(os.path.join(out, "metrics.csv"), "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["n", "num_bins", "acc", "ece", "mce", "brier", "nll"])
                writer.writerow(
                    [len(labels), bins, *(repr(v) for v in (report.accuracy, report.ece, report.mce, report.brier, report.nll))]
                )
        except OSError as exc:
            raise ArcmixIOError(f"cannot write metrics: {exc}") from None
    return 0


def format_table(summary):
    """Methods as rows, one ACC/ECE column pair (in %) per dataset."""
    datasets = sorted({d for d, _ in summary})
    methods = [m for m in METHODS if any((d, m) in summary for d in datasets)]
    width = 24
    head = " " * width + "".join(f"{d:^22}" for d in datasets)
    sub = " " * width + "".join(f"{'ACC':>10}{'ECE':>10}  " for _ in datasets)
    lines = [head, sub]
    for m in methods:
        cells = []
        for d in datasets:
            s = summary.get((d, m))
            cells.append(f"{100 * s['acc']:>10.2f}{100 * s['ece']:>10.2f}  " if s else f"{'-':>10}{'-':>10}  ")
        lines.append(f"{METHOD_LABELS[m]:<{width}}" + "".join(cells))
    return "\n".join(lines)


def cmd_report(args):
    rows = []
    for path in args.results:
        try:
            rows.extend(harness.read_results(path))
        except OSError as exc:
            raise ArcmixIOError(f"cannot read {path}: {exc}") from None
    summary = harness.aggregate(rows)
    if not summary:
        raise InvalidInputError("no successful runs in the given results files")
    print("mean over runs, ACC and ECE in %")
    print(format_table(summary))
    if args.out:
        path = os.path.join(_out_dir(args.out), "summary.csv")
        keys = ["n"] + [f"{m}{s}" for m in ("acc", "ece", "mce", "brier", "nll") for s in ("", "_std", "_median")]
        try:
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["dataset", "method", *keys])
                for (d, m), s in sorted(summary.items()):
                    writer.writerow([d, m, *(s[k] if k == "n" else repr(s[k]) for k in keys)])
        except OSError as exc:
            raise ArcmixIOError(f"cannot write {path}: {exc}") from None
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="arcmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a synthetic dataset to CSV")
    p.add_argument("spec", help="overlap2d or ring8")
    p.add_argument("--n", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--name", help="file stem (default: the dataset name)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one config")
    p.add_argument("config", help="YAML experiment config")
    p.add_argument("--seed", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--out", default="runs/train")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="run every config of a grid file")
    p.add_argument("config", help="YAML grid file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--bins", type=int)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--out", default="runs/grid")
    p.add_argument("--wall-time", action="store_true", help="fill wall_time_s in results.csv (not reproducible)")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("eval", help="metrics for a CSV of class probabilities plus a label column")
    p.add_argument("predictions")
    p.add_argument("--bins", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarise results CSVs as a method x dataset table")
    p.add_argument("results", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ArcmixError as exc:
        print(f"arcmix {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
