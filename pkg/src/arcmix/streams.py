"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator.  A run seed is turned
into a :class:`numpy.random.SeedSequence` and split into independent child
streams, one per purpose, so that e.g. changing the Mixup concentration never
perturbs the weight initialisation or the epoch shuffling.
"""

import numpy as np

# Child index of each purpose.  New purposes must be appended: spawn keys are
# positional, so reordering would change every existing stream.
PURPOSES = ("init", "data", "mixup", "validation", "dataset")


def make_rng(seed):
    """A PCG64 generator seeded from an integer or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def run_streams(seed):
    """Return ``{purpose: Generator}`` for one training run."""
    children = np.random.SeedSequence(int(seed)).spawn(len(PURPOSES))
    return {name: make_rng(child) for name, child in zip(PURPOSES, children)}


def derive_seed(master_seed, index):
    """Deterministic 63-bit seed for run ``index`` of a grid."""
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))
