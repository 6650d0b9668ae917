"""Soft-target cross-entropy and the Auto-Regularized-Confidence (ARC) loss.

ARC bins a batch's confidences (max posterior per sample), computes the
accuracy of every bin, and penalises the squared gap between confidence and
accuracy.  Two flavours are provided:

* ``v1`` compares each bin's *mean* confidence with its accuracy;
* ``v2`` compares every *individual* confidence with its bin's accuracy, which
  also punishes a spread of confidences inside a bin.

Bin accuracies and bin memberships are constants as far as differentiation is
concerned: the gradient only flows through the confidences.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

PROB_FLOOR = 1e-12

BIN_MODES = {
    "single": (1,),
    "fixed-15": (15,),
    "averaged": (5, 15, 30),
}
VARIANTS = ("v1", "v2")
TARGETS = ("originals", "mixed")


@dataclass(frozen=True)
class BinPartition:
    """``num_bins`` equal-width bins on [0, 1].

    Bins are right-closed, ``(e[i-1], e[i]]``, except the first which also
    contains 0, so a confidence of exactly 1.0 lands in the last bin.
    """

    num_bins: int

    def __post_init__(self):
        if int(self.num_bins) < 1:
            raise InvalidConfigError("num_bins must be at least 1")

    @property
    def edges(self):
        # i / M is correctly rounded, unlike linspace, so edges such as 0.6 are exact
        return np.arange(self.num_bins + 1) / self.num_bins

    def assign(self, confidence):
        idx = np.searchsorted(self.edges, np.asarray(confidence, dtype=np.float64), side="left") - 1
        return np.clip(idx, 0, self.num_bins - 1)


def as_partition(bins):
    return bins if isinstance(bins, BinPartition) else BinPartition(int(bins))


@dataclass
class ConfidenceRecords:
    """Per-sample confidence, predicted class and correctness for a batch.

    Sample ``i`` of the batch is row ``i`` of each array.
    """

    confidence: np.ndarray
    prediction: np.ndarray
    hit: np.ndarray

    def __len__(self):
        return len(self.confidence)

    def subset(self, index):
        return ConfidenceRecords(self.confidence[index], self.prediction[index], self.hit[index])


def confidences_and_hits(probs, reference_labels):
    """Confidence = row max; ties in the argmax go to the lowest class index."""
    probs = np.asarray(probs, dtype=np.float64)
    prediction = probs.argmax(axis=1)
    confidence = probs[np.arange(len(probs)), prediction]
    hit = prediction == np.asarray(reference_labels)
    return ConfidenceRecords(confidence, prediction, hit)


@dataclass
class BinStats:
    count: int
    mean_confidence: float | None
    accuracy: float | None


def bin_summary(records, bins):
    """Counts, confidence sums and hit counts per bin, plus each sample's bin."""
    partition = as_partition(bins)
    idx = partition.assign(records.confidence)
    m = partition.num_bins
    counts = np.bincount(idx, minlength=m)
    conf_sums = np.bincount(idx, weights=records.confidence, minlength=m)
    hit_sums = np.bincount(idx, weights=records.hit.astype(np.float64), minlength=m)
    return idx, counts, conf_sums, hit_sums


def cross_entropy(probs, soft_targets):
    """Mean cross-entropy against soft targets.

    Returns ``(loss, dloss_dlogits)`` where the gradient is taken w.r.t. the
    logits that produced ``probs`` through a softmax.
    """
    p = np.asarray(probs, dtype=np.float64)
    t = np.asarray(soft_targets, dtype=np.float64)
    if p.shape != t.shape:
        raise InvalidInputError(f"probs {p.shape} and targets {t.shape} differ in shape")
    if not np.allclose(t.sum(axis=1), 1.0, rtol=0, atol=1e-6):
        raise InvalidInputError("target rows must sum to 1")
    n = len(p)
    loss = -np.sum(t * np.log(np.maximum(p, PROB_FLOOR))) / n
    return float(loss), (p - t) / n


def arc_loss(records, bins, variant="v1"):
    """ARC value and its gradient w.r.t. each sample's confidence.

    The sum over bins is normalised by the number of *occupied* bins.
    """
    if len(records) == 0:
        raise InvalidInputError("ARC needs at least one sample")
    if variant not in VARIANTS:
        raise InvalidConfigError(f"unknown ARC variant {variant!r}")
    idx, counts, conf_sums, hit_sums = bin_summary(records, bins)
    occupied = counts > 0
    n_occupied = int(occupied.sum())
    safe = np.where(occupied, counts, 1)
    mean_conf = conf_sums / safe
    accuracy = hit_sums / safe

    if variant == "v1":
        gap = np.where(occupied, mean_conf - accuracy, 0.0)
        loss = np.sum(gap**2) / n_occupied
        grad = 2.0 * gap[idx] / (n_occupied * counts[idx])
    else:
        dev = records.confidence - accuracy[idx]
        per_bin = np.bincount(idx, weights=dev**2, minlength=len(counts)) / safe
        loss = np.sum(per_bin) / n_occupied
        grad = 2.0 * dev / (n_occupied * counts[idx])
    return float(loss), grad


def arc_loss_averaged(records, bin_counts=(5, 15, 30), variant="v1"):
    """Mean of :func:`arc_loss` over several bin counts (value and gradient)."""
    if len(bin_counts) == 0:
        raise InvalidConfigError("need at least one bin count")
    parts = [arc_loss(records, m, variant) for m in bin_counts]
    loss = sum(p[0] for p in parts) / len(parts)
    grad = sum(p[1] for p in parts) / len(parts)
    return loss, grad


def confidence_grad_to_logits(probs, records, dconf):
    """Push dLoss/dConfidence through ``max(softmax(z))``.

    Only the argmax probability is differentiated; its softmax Jacobian row is
    ``p_a * (e_a - p)``.
    """
    p = np.asarray(probs, dtype=np.float64)
    rows = np.arange(len(p))
    p_a = p[rows, records.prediction]
    out = -p * p_a[:, None]
    out[rows, records.prediction] += p_a
    return out * np.asarray(dconf)[:, None]


def combined_loss(ce, arc, arc_weight):
    if arc_weight < 0:
        raise InvalidConfigError("arc_weight must be nonnegative")
    return ce + arc_weight * arc


@dataclass
class ArcConfig:
    variant: str = "v1"
    bins: str = "single"
    target: str = "originals"
    arc_weight: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfigError(f"arc.variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.bins not in BIN_MODES:
            raise InvalidConfigError(f"arc.bins must be one of {tuple(BIN_MODES)}, got {self.bins!r}")
        if self.target not in TARGETS:
            raise InvalidConfigError(f"arc.target must be one of {TARGETS}, got {self.target!r}")
        if not self.arc_weight >= 0:
            raise InvalidConfigError("arc.arc_weight must be nonnegative")

    @property
    def bin_counts(self):
        return BIN_MODES[self.bins]

    def evaluate(self, records):
        """ARC value and confidence gradient under this configuration."""
        counts = self.bin_counts
        if len(counts) == 1:
            return arc_loss(records, counts[0], self.variant)
        return arc_loss_averaged(records, counts, self.variant)


def arc_reference_labels(batch, target):
    """Which inputs ARC is evaluated on, and against which labels.

    Returns a list of ``(inputs, labels)``; the caller averages ARC over the
    entries.  ``originals`` scores the two unmixed halves of every pair
    separately.  ``mixed`` scores the blended input against its dominant
    label, with ``gamma == 0.5`` counted as the first sample's label.
    """
    if target == "originals":
        return [(batch.x1, batch.t1), (batch.x2, batch.t2)]
    if target == "mixed":
        return [(batch.x_tilde, np.where(batch.gamma >= 0.5, batch.t1, batch.t2))]
    raise InvalidConfigError(f"unknown ARC target {target!r}")
