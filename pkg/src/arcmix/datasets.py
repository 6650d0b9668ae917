"""Synthetic Gaussian-mixture classification problems with exact posteriors,
plus CSV loading and seeded train/validation/test splitting.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArcmixIOError, InputFormatError, InvalidConfigError, InvalidInputError
from .metrics import bayes_decision
from .streams import make_rng


@dataclass
class GaussianClass:
    mean: np.ndarray
    sigma: float
    prior: float


@dataclass
class GaussianMixtureSpec:
    """Class-conditional isotropic Gaussians, ``x | k ~ N(mean_k, sigma_k^2 I)``."""

    classes: list
    name: str = "custom"

    def __post_init__(self):
        if not self.classes:
            raise InvalidConfigError("a mixture needs at least one class")
        self.classes = [
            GaussianClass(np.asarray(c.mean, dtype=np.float64), float(c.sigma), float(c.prior)) for c in self.classes
        ]
        dims = {c.mean.shape for c in self.classes}
        if len(dims) != 1 or next(iter(dims)) == () or len(next(iter(dims))) != 1:
            raise InvalidConfigError("class means must be vectors of one common dimension")
        if any(not c.sigma > 0 for c in self.classes):
            raise InvalidConfigError("sigma must be positive")
        priors = self.priors
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise InvalidConfigError("priors must be nonnegative and sum to 1")

    @property
    def num_classes(self):
        return len(self.classes)

    @property
    def dim(self):
        return self.classes[0].mean.shape[0]

    @property
    def priors(self):
        return np.array([c.prior for c in self.classes])

    @property
    def means(self):
        return np.stack([c.mean for c in self.classes])

    @property
    def sigmas(self):
        return np.array([c.sigma for c in self.classes])


def overlap2d():
    """Two unit-variance classes at (-1, 0) and (1, 0), equal priors."""
    return GaussianMixtureSpec(
        [GaussianClass([-1.0, 0.0], 1.0, 0.5), GaussianClass([1.0, 0.0], 1.0, 0.5)],
        name="overlap2d",
    )


def ring8():
    """Eight classes spaced evenly on a circle of radius 2, sigma 0.7."""
    angles = 2 * np.pi * np.arange(8) / 8
    classes = [GaussianClass([2 * np.cos(a), 2 * np.sin(a)], 0.7, 1 / 8) for a in angles]
    return GaussianMixtureSpec(classes, name="ring8")


SPECS = {"overlap2d": overlap2d, "ring8": ring8}


def get_spec(name):
    try:
        return SPECS[name]()
    except KeyError:
        raise InvalidConfigError(f"unknown dataset spec {name!r}; known: {sorted(SPECS)}") from None


@dataclass
class LabeledDataset:
    inputs: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    num_classes: int
    # row numbers in the dataset this one was split from
    indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or len(self.inputs) != len(self.labels):
            raise InvalidInputError("inputs must be (n, d) with one label per row")
        if len(self.labels) == 0:
            raise InvalidInputError("a dataset needs at least one sample")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise InvalidInputError(f"labels must lie in [0, {self.num_classes})")
        if self.indices is None:
            self.indices = np.arange(len(self.labels))

    def __len__(self):
        return len(self.labels)

    def take(self, index):
        return LabeledDataset(self.inputs[index], self.labels[index], self.num_classes, self.indices[index])


def sample_dataset(spec, n, rng):
    if n < 1:
        raise InvalidConfigError("n must be at least 1")
    rng = rng if isinstance(rng, np.random.Generator) else make_rng(rng)
    labels = rng.choice(spec.num_classes, size=n, p=spec.priors)
    noise = rng.standard_normal((n, spec.dim))
    inputs = spec.means[labels] + spec.sigmas[labels, None] * noise
    return LabeledDataset(inputs, labels, spec.num_classes)


def log_joint(spec, x):
    """``log p(k) + log N(x; mean_k, sigma_k^2 I)`` for every row of ``x``; shape (n, C)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    sq = ((x[:, None, :] - spec.means[None, :, :]) ** 2).sum(axis=-1)
    s2 = spec.sigmas**2
    with np.errstate(divide="ignore"):
        log_prior = np.log(spec.priors)
    return log_prior - 0.5 * sq / s2 - 0.5 * spec.dim * np.log(2 * np.pi * s2)


def true_posterior(spec, x):
    """Exact class posterior ``p(k | x)``; a vector for one point, (n, C) for many."""
    lj = log_joint(spec, x)
    lj = lj - lj.max(axis=1, keepdims=True)
    p = np.exp(lj)
    p /= p.sum(axis=1, keepdims=True)
    return p[0] if np.ndim(x) == 1 else p


def bayes_error_estimate(spec, n_mc, rng):
    """Monte-Carlo estimate of ``1 - E[max_k p(k|x)]``; returns ``(estimate, standard_error)``."""
    if n_mc < 10_000:
        raise InvalidConfigError("n_mc must be at least 10^4")
    data = sample_dataset(spec, n_mc, rng)
    top = true_posterior(spec, data.inputs).max(axis=1)
    return float(1.0 - top.mean()), float(top.std(ddof=1) / math.sqrt(n_mc))


def bayes_accuracy(spec, data):
    """Accuracy of the zero-one Bayes rule under the true posterior."""
    return float(np.mean(bayes_decision(true_posterior(spec, data.inputs)) == data.labels))


def _parse_row(row, line):
    try:
        values = [float(v) for v in row[:-1]]
    except ValueError:
        raise InputFormatError(f"non-numeric feature in {row!r}", line) from None
    if not all(math.isfinite(v) for v in values):
        raise InputFormatError(f"non-finite feature in {row!r}", line)
    try:
        label = float(row[-1])
    except ValueError:
        raise InputFormatError(f"non-numeric label {row[-1]!r}", line) from None
    if not label.is_integer() or label < 0:
        raise InputFormatError(f"label must be a nonnegative integer, got {row[-1]!r}", line)
    return values, int(label)


def _looks_numeric(row):
    try:
        [float(v) for v in row]
    except ValueError:
        return False
    return True


def load_csv(path, num_classes=None):
    """Rows of ``d`` numeric features followed by an integer label.

    A first row that is not entirely numeric is taken to be a header.  The
    class count defaults to ``max(label) + 1``.
    """
    try:
        with open(path, newline="") as fh:
            rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise ArcmixIOError(f"cannot read {path}: {exc}") from None
    if rows and not _looks_numeric(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    width = len(rows[0][1])
    if width < 2:
        raise InputFormatError("need at least one feature and a label", rows[0][0])
    inputs, labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise InputFormatError(f"expected {width} fields, found {len(row)}", line)
        values, label = _parse_row(row, line)
        inputs.append(values)
        labels.append(label)
    labels = np.array(labels)
    k = int(labels.max()) + 1 if num_classes is None else int(num_classes)
    return LabeledDataset(np.array(inputs), labels, k)


def save_csv(dataset, path):
    d = dataset.inputs.shape[1]
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"f{j + 1}" for j in range(d)] + ["label"])
            for x, t in zip(dataset.inputs, dataset.labels):
                writer.writerow([repr(float(v)) for v in x] + [int(t)])
    except OSError as exc:
        raise ArcmixIOError(f"cannot write {path}: {exc}") from None


@dataclass
class SplitSpec:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fr = (self.train, self.val, self.test)
        if any(not 0 < f < 1 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise InvalidConfigError(f"split fractions must each lie in (0, 1) and sum to 1, got {fr}")


def split(dataset, spec):
    """Shuffle once, then cut into train/val/test.  Not stratified."""
    n = len(dataset)
    n_train = int(round(spec.train * n))
    n_val = int(round(spec.val * n))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise InvalidConfigError(f"split of {n} samples leaves an empty part ({n_train}/{n_val}/{n_test})")
    rng = spec.seed if isinstance(spec.seed, np.random.Generator) else make_rng(spec.seed)
    perm = rng.permutation(n)
    return (
        dataset.take(perm[:n_train]),
        dataset.take(perm[n_train : n_train + n_val]),
        dataset.take(perm[n_train + n_val :]),
    )
