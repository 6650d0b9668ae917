"""Mixup vicinal sampling.

Each sample in a batch is paired with a partner drawn by a random permutation
of the same batch, and the pair is blended with its own weight
``gamma ~ Beta(beta_mix, beta_mix)``.  The unblended pairs are kept on the
batch so that the ARC loss can be evaluated on the original inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError


@dataclass
class MixupBatch:
    x_tilde: np.ndarray  # (n, d)
    t_tilde: np.ndarray  # (n, C) soft targets
    x1: np.ndarray
    x2: np.ndarray
    t1: np.ndarray  # (n,) int labels
    t2: np.ndarray
    gamma: np.ndarray  # (n,)

    def __len__(self):
        return len(self.gamma)


def sample_gammas(beta_mix, size, rng):
    """``size`` draws from the symmetric Beta(beta_mix, beta_mix).

    Sampled as ``X / (X + Y)`` with ``X, Y ~ Gamma(beta_mix, 1)``.  numpy's
    gamma sampler switches to a rejection scheme below shape 1, which keeps
    this correct for the small concentrations Mixup usually runs with.
    """
    if not beta_mix > 0:
        raise InvalidConfigError(f"beta_mix must be positive, got {beta_mix}")
    x = rng.standard_gamma(beta_mix, size)
    y = rng.standard_gamma(beta_mix, size)
    s = x + y
    # both gammas can underflow to 0 for tiny shapes; redraw those pairs
    bad = s == 0
    while np.any(bad):
        k = int(np.count_nonzero(bad))
        x[bad] = rng.standard_gamma(beta_mix, k)
        y[bad] = rng.standard_gamma(beta_mix, k)
        s = x + y
        bad = s == 0
    return x / s


def sample_gamma(beta_mix, rng):
    return float(sample_gammas(beta_mix, 1, rng)[0])


def one_hot(labels, num_classes):
    labels = np.asarray(labels)
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def mix_pairs(x1, t1, x2, t2, gamma, num_classes):
    """Blend explicit pairs with explicit weights."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    t1 = np.asarray(t1, dtype=np.int64)
    t2 = np.asarray(t2, dtype=np.int64)
    x_tilde = _blend(x1, x2, gamma)
    t_tilde = _blend(one_hot(t1, num_classes), one_hot(t2, num_classes), gamma)
    return MixupBatch(x_tilde, t_tilde, x1, x2, t1, t2, gamma)


def _blend(a, b, gamma):
    g = gamma[:, None]
    out = g * a + (1.0 - g) * b
    # rounding can leave the hull by an ulp (and equal endpoints need not be reproduced)
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def mix_batch(inputs, labels, num_classes, beta_mix, rng):
    """Mix a labelled batch with a shuffled copy of itself."""
    x = np.asarray(inputs, dtype=np.float64)
    t = np.asarray(labels, dtype=np.int64)
    n = len(t)
    if n == 0:
        raise InvalidInputError("cannot mix an empty batch")
    if t.min() < 0 or t.max() >= num_classes:
        raise InvalidInputError(f"labels must lie in [0, {num_classes})")
    perm = rng.permutation(n)
    gamma = sample_gammas(beta_mix, n, rng)
    return mix_pairs(x, t, x[perm], t[perm], gamma, num_classes)
