"""Training loops for the Baseline / Mixup / ARC method grid.

The per-step objective is

    ce_weight * CE(x, targets) + arc_weight * mean_j ARC(inputs_j, labels_j)

where the ARC terms come from :func:`arcmix.losses.arc_reference_labels` (or
from a validation batch for the validation-set variant).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ArcmixError, InvalidConfigError, TrainingDivergedError
from .losses import (
    arc_reference_labels,
    confidence_grad_to_logits,
    confidences_and_hits,
    cross_entropy,
)
from .metrics import evaluate
from .mixup import mix_batch, one_hot
from .streams import run_streams

METHODS = ("baseline", "baseline_mixup", "arc", "arc_mixup", "arc_on_validation")
MIXING_METHODS = ("baseline_mixup", "arc_mixup")
ARC_METHODS = ("arc", "arc_mixup", "arc_on_validation")


@dataclass
class StepTerms:
    loss: float
    ce: float
    arc: float | None


def objective(params, x, targets, arc_inputs=(), arc=None, ce_weight=1.0):
    """Loss and parameter gradients for one step.

    ``arc_inputs`` is a sequence of ``(inputs, labels)``; ARC is averaged over
    them.  An entry whose ``inputs`` is the very array ``x`` reuses the CE
    forward pass.  With ``arc`` None (or no ARC inputs) only CE is used.
    """
    logits, cache = nn.forward(params, x)
    probs = nn.softmax(logits)
    ce, dlogits = cross_entropy(probs, targets)
    dlogits = ce_weight * dlogits
    grads = None
    arc_value = None
    if arc is not None and len(arc_inputs):
        weight = arc.arc_weight / len(arc_inputs)
        arc_value = 0.0
        for inputs, labels in arc_inputs:
            if inputs is x:
                a_probs, a_cache, shared = probs, cache, True
            else:
                a_logits, a_cache = nn.forward(params, inputs)
                a_probs, shared = nn.softmax(a_logits), False
            records = confidences_and_hits(a_probs, labels)
            value, dconf = arc.evaluate(records)
            arc_value += value / len(arc_inputs)
            if weight == 0:
                continue
            a_dlogits = weight * confidence_grad_to_logits(a_probs, records, dconf)
            if shared:
                dlogits = dlogits + a_dlogits
            else:
                g = nn.backward(params, a_cache, a_dlogits)
                grads = g if grads is None else grads.scaled_add(g, 1.0)
    main = nn.backward(params, cache, dlogits)
    grads = main if grads is None else main.scaled_add(grads, 1.0)
    loss = ce_weight * ce + (arc.arc_weight * arc_value if arc_value is not None else 0.0)
    return StepTerms(float(loss), float(ce), arc_value), grads


@dataclass
class RunResult:
    config: object
    test: object = None
    validation: object = None
    curves: dict = field(default_factory=dict)
    wall_time: float = 0.0
    error: str | None = None
    error_type: str | None = None
    split_indices: dict = field(default_factory=dict, repr=False)
    params: object = field(default=None, repr=False)

    @property
    def ok(self):
        return self.error is None


def predict_proba(params, inputs):
    logits, _ = nn.forward(params, inputs)
    return nn.softmax(logits)


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    # the last, possibly short, batch is kept
    return [perm[i : i + batch_size] for i in range(0, n, batch_size)]


class _ValidationCycler:
    """Endless stream of shuffled validation mini-batches."""

    def __init__(self, data, batch_size, rng):
        self.data = data
        self.batch_size = min(batch_size, len(data))
        self.rng = rng
        self.queue = []

    def next(self):
        if not self.queue:
            self.queue = _batches(len(self.data), self.batch_size, self.rng)
        idx = self.queue.pop(0)
        return self.data.inputs[idx], self.data.labels[idx]


def _check_finite(value, epoch):
    if not np.isfinite(value):
        raise TrainingDivergedError("non-finite loss", epoch)


def train(config, data):
    """Run one experiment.  ``data`` is a ``(train, val, test)`` triple of
    :class:`arcmix.datasets.LabeledDataset`.

    Validation and test metrics are computed on the raw (never mixed) splits
    after every epoch.
    """
    train_set, val_set, test_set = data
    method = config.method
    if method not in METHODS:
        raise InvalidConfigError(f"unknown method {method!r}")
    C = train_set.num_classes
    streams = run_streams(config.seed)
    sizes = [train_set.inputs.shape[1], *config.hidden_sizes, C]
    params = nn.init_network(sizes, streams["init"])
    schedule = nn.StepSchedule(config.learning_rate, config.lr_decay, list(config.lr_milestones))
    state = nn.new_sgd_state(params, schedule.rate(0), config.momentum, config.weight_decay)

    mixes = method in MIXING_METHODS
    arc = config.arc if method in ARC_METHODS else None
    ce_weight = 0.0 if config.arc_only else 1.0
    if config.arc_only and arc is None:
        raise InvalidConfigError("arc_only needs a method that uses the ARC loss")
    cycler = None
    if method == "arc_on_validation":
        cycler = _ValidationCycler(val_set, config.batch_size, streams["validation"])

    curves = {k: [] for k in ("loss", "ce", "train_accuracy", "val_accuracy", "val_ece", "test_accuracy", "test_ece")}
    curves["arc"] = [] if arc is not None else None
    started = time.perf_counter()
    val_report = test_report = None
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for epoch in range(config.epochs):
            state.learning_rate = schedule.rate(epoch)
            sums = {"loss": 0.0, "ce": 0.0, "arc": 0.0}
            n_seen = 0
            for idx in _batches(len(train_set), config.batch_size, streams["data"]):
                xb = train_set.inputs[idx]
                tb = train_set.labels[idx]
                if mixes:
                    mb = mix_batch(xb, tb, C, config.beta_mix, streams["mixup"])
                    x, targets = mb.x_tilde, mb.t_tilde
                    arc_inputs = arc_reference_labels(mb, arc.target) if arc is not None else ()
                else:
                    x, targets = xb, one_hot(tb, C)
                    arc_inputs = [(x, tb)] if arc is not None else ()
                if cycler is not None:
                    arc_inputs = [cycler.next()]
                terms, grads = objective(params, x, targets, arc_inputs, arc, ce_weight)
                _check_finite(terms.loss, epoch)
                try:
                    params, state = nn.sgd_step(params, grads, state)
                except TrainingDivergedError as exc:
                    raise TrainingDivergedError(str(exc), epoch) from None
                if not params.all_finite():
                    raise TrainingDivergedError("non-finite parameters", epoch)
                k = len(idx)
                n_seen += k
                sums["loss"] += k * terms.loss
                sums["ce"] += k * terms.ce
                if terms.arc is not None:
                    sums["arc"] += k * terms.arc

            curves["loss"].append(sums["loss"] / n_seen)
            curves["ce"].append(sums["ce"] / n_seen)
            if curves["arc"] is not None:
                curves["arc"].append(sums["arc"] / n_seen)
            train_probs = predict_proba(params, train_set.inputs)
            curves["train_accuracy"].append(float(np.mean(train_probs.argmax(axis=1) == train_set.labels)))
            val_report = evaluate(predict_proba(params, val_set.inputs), val_set.labels, config.num_eval_bins)
            test_report = evaluate(predict_proba(params, test_set.inputs), test_set.labels, config.num_eval_bins)
            for prefix, rep in (("val", val_report), ("test", test_report)):
                _check_finite(rep.nll, epoch)
                curves[f"{prefix}_accuracy"].append(rep.accuracy)
                curves[f"{prefix}_ece"].append(rep.ece)

    return RunResult(
        config=config,
        test=test_report,
        validation=val_report,
        curves=curves,
        wall_time=time.perf_counter() - started,
        split_indices={"train": train_set.indices, "val": val_set.indices, "test": test_set.indices},
        params=params,
    )


def train_arc_on_validation(config, data):
    """CE from training batches, ARC from cycled validation batches."""
    if config.method != "arc_on_validation":
        config = config.replace(method="arc_on_validation")
    return train(config, data)


def failed_result(config, exc, wall_time=0.0):
    return RunResult(
        config=config,
        wall_time=wall_time,
        error=str(exc),
        error_type=type(exc).__name__ if isinstance(exc, ArcmixError) else "Exception",
    )
