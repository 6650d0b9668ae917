"""A small fully connected ReLU classifier with hand-written backprop.

Everything is float64.  Parameters live in a :class:`ParamSet`; the optimiser
never mutates one in place, so a forward cache can always be checked against
the exact parameter object that produced it.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CacheMismatchError, InvalidConfigError, ShapeError, TrainingDivergedError
from .streams import make_rng


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)


@dataclass
class ParamSet:
    layers: list

    @property
    def layer_sizes(self):
        return [self.layers[0].weights.shape[1]] + [layer.weights.shape[0] for layer in self.layers]

    def arrays(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` of the underlying arrays (not copies)."""
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.biases))
        return out

    @classmethod
    def from_arrays(cls, arrays):
        return cls([Layer(w, b) for w, b in zip(arrays[0::2], arrays[1::2])])

    def copy(self):
        return ParamSet.from_arrays([a.copy() for a in self.arrays()])

    def zeros_like(self):
        return ParamSet.from_arrays([np.zeros_like(a) for a in self.arrays()])

    @property
    def size(self):
        return sum(a.size for a in self.arrays())

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    def all_finite(self):
        return all(np.isfinite(a).all() for a in self.arrays())

    def scaled_add(self, other, scale):
        """``self + scale * other`` as a new ParamSet."""
        return ParamSet.from_arrays([a + scale * b for a, b in zip(self.arrays(), other.arrays())])


@dataclass
class ForwardCache:
    params: ParamSet
    # activations[0] is the input batch, activations[k] the output of layer k-1
    activations: list
    preactivations: list


@dataclass
class SgdState:
    buffers: ParamSet
    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 5e-4
    step_count: int = 0


def init_network(layer_sizes, seed):
    """He-normal weights (variance ``2 / fan_in``), zero biases.

    ``seed`` is an integer or an existing ``numpy.random.Generator``.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise InvalidConfigError(f"need at least an input and an output size, got {layer_sizes!r}")
    if any(s <= 0 for s in sizes):
        raise InvalidConfigError(f"layer sizes must be positive, got {layer_sizes!r}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
        layers.append(Layer(w, np.zeros(fan_out)))
    return ParamSet(layers)


def forward(params, inputs):
    """Logits of shape (n, C) and the cache needed by :func:`backward`."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"inputs must be a 2-D (n, d) array, got shape {x.shape}")
    d_in = params.layers[0].weights.shape[1]
    if x.shape[1] != d_in:
        raise ShapeError(f"network expects {d_in} input features, got {x.shape[1]}")
    activations = [x]
    preactivations = []
    h = x
    last = len(params.layers) - 1
    for k, layer in enumerate(params.layers):
        z = h @ layer.weights.T + layer.biases
        preactivations.append(z)
        h = z if k == last else np.maximum(z, 0.0)
        activations.append(h)
    return h, ForwardCache(params, activations, preactivations)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def backward(params, cache, dlogits):
    """Gradients of a scalar loss w.r.t. every parameter, given dLoss/dLogits."""
    if cache.params is not params:
        raise CacheMismatchError("cache was produced by a different ParamSet")
    g = np.asarray(dlogits, dtype=np.float64)
    if g.shape != cache.activations[-1].shape:
        raise ShapeError(f"dlogits shape {g.shape} does not match logits {cache.activations[-1].shape}")
    grads = [None] * len(params.layers)
    for k in range(len(params.layers) - 1, -1, -1):
        if k < len(params.layers) - 1:
            g = g * (cache.preactivations[k] > 0)
        h_prev = cache.activations[k]
        grads[k] = Layer(g.T @ h_prev, g.sum(axis=0))
        if k > 0:
            g = g @ params.layers[k].weights
    return ParamSet(grads)


def sgd_step(params, grads, state):
    """One step of heavy-ball SGD with L2 weight decay folded into the gradient.

    Returns ``(new_params, new_state)``; the inputs are left untouched.
    """
    if not grads.all_finite():
        raise TrainingDivergedError("non-finite gradient")
    new_params, new_buffers = [], []
    for p, g, buf in zip(params.arrays(), grads.arrays(), state.buffers.arrays()):
        if p.shape != g.shape or p.shape != buf.shape:
            raise ShapeError(f"parameter/gradient/buffer shapes differ: {p.shape}, {g.shape}, {buf.shape}")
        b = state.momentum * buf + (g + state.weight_decay * p)
        new_buffers.append(b)
        new_params.append(p - state.learning_rate * b)
    new_state = SgdState(
        ParamSet.from_arrays(new_buffers),
        state.learning_rate,
        state.momentum,
        state.weight_decay,
        state.step_count + 1,
    )
    return ParamSet.from_arrays(new_params), new_state


def new_sgd_state(params, learning_rate, momentum=0.9, weight_decay=5e-4):
    if learning_rate <= 0:
        raise InvalidConfigError("learning_rate must be positive")
    if not 0 <= momentum < 1:
        raise InvalidConfigError("momentum must lie in [0, 1)")
    if weight_decay < 0:
        raise InvalidConfigError("weight_decay must be nonnegative")
    return SgdState(params.zeros_like(), float(learning_rate), float(momentum), float(weight_decay))


@dataclass
class StepSchedule:
    """Piecewise-constant learning rate: multiply by ``factor`` at each milestone epoch."""

    initial: float = 0.1
    factor: float = 0.1
    milestones: list = field(default_factory=lambda: [100, 150])

    def rate(self, epoch):
        passed = sum(1 for m in self.milestones if epoch >= m)
        return self.initial * self.factor**passed


def grad_check(params, loss_evaluator, batch, eps=1e-5, num_coords=100, rng=None, floor=1e-6):
    """Max relative error between analytic and central-difference gradients.

    ``loss_evaluator(params, batch)`` must return ``(loss, grads)``.  At most
    ``num_coords`` randomly chosen coordinates are probed (all of them when the
    network is smaller).  The relative error of a coordinate is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    if eps <= 0:
        raise InvalidConfigError("eps must be positive")
    _, grads = loss_evaluator(params, batch)
    analytic = grads.flat()
    total = analytic.size
    rng = rng if rng is not None else make_rng(0)
    coords = np.arange(total) if total <= num_coords else rng.choice(total, size=num_coords, replace=False)

    base = params.flat()
    sizes = [a.size for a in params.arrays()]
    shapes = [a.shape for a in params.arrays()]

    def unflatten(vec):
        parts = np.split(vec, np.cumsum(sizes)[:-1])
        return ParamSet.from_arrays([p.reshape(s) for p, s in zip(parts, shapes)])

    worst = 0.0
    for c in coords:
        plus = base.copy()
        plus[c] += eps
        minus = base.copy()
        minus[c] -= eps
        numeric = (loss_evaluator(unflatten(plus), batch)[0] - loss_evaluator(unflatten(minus), batch)[0]) / (2 * eps)
        a = analytic[c]
        err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        worst = max(worst, err)
    return worst
