"""Calibration metrics, reliability-diagram statistics and the Bayes decision rule.

``n`` is always the number of samples and ``num_bins`` the number of
equal-width confidence bins.  Bins follow :class:`arcmix.losses.BinPartition`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .losses import PROB_FLOOR, BinPartition, BinStats, bin_summary, confidences_and_hits

DEFAULT_BINS = 15


def _per_bin(records, num_bins):
    if len(records) == 0:
        raise InvalidInputError("calibration metrics need at least one sample")
    if int(num_bins) < 1:
        raise InvalidConfigError("num_bins must be at least 1")
    _, counts, conf_sums, hit_sums = bin_summary(records, num_bins)
    occupied = counts > 0
    safe = np.where(occupied, counts, 1)
    gaps = np.abs(hit_sums / safe - conf_sums / safe)
    return counts, occupied, gaps


def ece(records, num_bins=DEFAULT_BINS):
    counts, occupied, gaps = _per_bin(records, num_bins)
    return float(np.sum(counts[occupied] * gaps[occupied]) / counts.sum())


def mce(records, num_bins=DEFAULT_BINS):
    _, occupied, gaps = _per_bin(records, num_bins)
    return float(gaps[occupied].max())


def brier(probs, labels):
    """Squared distance to the one-hot label, summed over classes, averaged over samples."""
    p = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    diff = p.copy()
    diff[np.arange(len(p)), labels] -= 1.0
    return float(np.mean(np.sum(diff**2, axis=1)))


def nll(probs, labels):
    p = np.asarray(probs, dtype=np.float64)
    p_true = p[np.arange(len(p)), np.asarray(labels)]
    return float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))


def reliability_bins(records, num_bins=DEFAULT_BINS):
    """One :class:`BinStats` per bin; empty bins have count 0 and ``None`` stats."""
    _, counts, conf_sums, hit_sums = bin_summary(records, num_bins)
    out = []
    for c, s, h in zip(counts, conf_sums, hit_sums):
        if c == 0:
            out.append(BinStats(0, None, None))
        else:
            out.append(BinStats(int(c), float(s / c), float(h / c)))
    return out


def ece_from_bins(bins):
    n = sum(b.count for b in bins)
    return sum(b.count * abs(b.accuracy - b.mean_confidence) for b in bins if b.count) / n


@dataclass
class MetricReport:
    accuracy: float
    ece: float
    mce: float
    brier: float
    nll: float
    num_bins: int
    bins: list = field(repr=False)

    @property
    def edges(self):
        return BinPartition(self.num_bins).edges

    def as_dict(self):
        return {k: getattr(self, k) for k in ("accuracy", "ece", "mce", "brier", "nll")}


def evaluate(probs, labels, num_bins=DEFAULT_BINS):
    """Accuracy plus every calibration metric for a matrix of class probabilities."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if len(probs) == 0:
        raise InvalidInputError("cannot evaluate an empty prediction set")
    records = confidences_and_hits(probs, labels)
    return MetricReport(
        accuracy=float(records.hit.mean()),
        ece=ece(records, num_bins),
        mce=mce(records, num_bins),
        brier=brier(probs, labels),
        nll=nll(probs, labels),
        num_bins=int(num_bins),
        bins=reliability_bins(records, num_bins),
    )


def zero_one_losses(num_classes):
    return 1.0 - np.eye(num_classes)


def bayes_decision(posterior, losses=None):
    """Index of the action with the smallest expected loss.

    ``losses[i, k]`` is the cost of taking action ``i`` when the truth is ``k``;
    the default is zero-one loss, i.e. the posterior argmax.  Accepts a single
    posterior vector or an (n, C) matrix of them.  Ties go to the lowest index.
    """
    p = np.asarray(posterior, dtype=np.float64)
    C = p.shape[-1]
    if losses is None:
        action = np.argmax(p, axis=-1)
        return int(action) if np.ndim(action) == 0 else action
    lam = np.asarray(losses, dtype=np.float64)
    if lam.ndim != 2 or lam.shape[1] != C:
        raise InvalidConfigError(f"loss matrix must have shape (actions, {C}), got {lam.shape}")
    if np.any(lam < 0):
        raise InvalidConfigError("losses must be nonnegative")
    risk = p @ lam.T
    action = np.argmin(risk, axis=-1)
    return int(action) if np.ndim(action) == 0 else action
