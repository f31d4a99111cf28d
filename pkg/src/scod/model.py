"""Dense feedforward networks over a single flat weight vector."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidArgument, TrainingDiverged

log = logging.getLogger(__name__)

_ACTIVATIONS = {"relu": kernels.RELU, "tanh": kernels.TANH}


@dataclass(frozen=True)
class ModelConfig:
    """Layer widths ``[n_in, h_1, ..., h_L, d]`` and the hidden activation."""

    layer_sizes: tuple
    activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise InvalidArgument("layer_sizes needs at least two positive entries")
        if self.activation not in _ACTIVATIONS:
            raise InvalidArgument(f"activation must be one of {sorted(_ACTIVATIONS)}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_in(self):
        return self.layer_sizes[0]

    @property
    def n_out(self):
        return self.layer_sizes[-1]

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def n_weights(self):
        s = self.layer_sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))

    def layer_slices(self):
        """``[(weight_slice, bias_slice), ...]`` into the flat vector, per layer."""
        out, off = [], 0
        for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            out.append((slice(off, off + a * b), slice(off + a * b, off + a * b + b)))
            off += a * b + b
        return out

    def to_dict(self):
        return {"layer_sizes": list(self.layer_sizes), "activation": self.activation}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["layer_sizes"]), d.get("activation", "relu"))

    @property
    def _sizes(self):
        return np.asarray(self.layer_sizes, dtype=np.int64)

    @property
    def _act(self):
        return _ACTIVATIONS[self.activation]


@dataclass(frozen=True)
class WeightMask:
    """Sorted, unique subset of weight indices (e.g. the last few layers)."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidArgument("mask must be a non-empty 1-d index set")
        if np.any(np.diff(idx) <= 0):
            raise InvalidArgument("mask indices must be sorted and unique")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return self.indices.size

    def __eq__(self, other):
        return isinstance(other, WeightMask) and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash(self.indices.tobytes())

    def validate(self, n_weights):
        if self.indices[-1] >= n_weights or self.indices[0] < 0:
            raise InvalidArgument("mask index out of range")


def check_weights(config, w):
    w = np.asarray(w, dtype=float)
    if w.shape != (config.n_weights,):
        raise InvalidArgument(f"expected {config.n_weights} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidArgument("weights must be finite")
    return w


def _check_inputs(config, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != config.n_in:
        raise InvalidArgument(f"expected inputs with {config.n_in} features, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgument("inputs must be finite")
    return np.ascontiguousarray(X)


def forward(config, w, x):
    """``f(x, w)`` for one input (``(n_in,)`` -> ``(d,)``) or a batch (``(B, n_in)`` -> ``(B, d)``)."""
    w = check_weights(config, w)
    single = np.ndim(x) == 1
    X = _check_inputs(config, x)
    out = kernels.forward_batch(config._sizes, config._act, w, X)
    return out[0] if single else out


def vjp(config, w, x, v):
    """Gradient of ``v . f(x, w)`` with respect to ``w`` (``v`` held constant)."""
    w = check_weights(config, w)
    X = _check_inputs(config, x)
    if X.shape[0] != 1:
        raise InvalidArgument("vjp takes a single input")
    v = np.asarray(v, dtype=float)
    if v.shape != (config.n_out,):
        raise InvalidArgument(f"cotangent must have shape ({config.n_out},)")
    V = np.ascontiguousarray(v.reshape(1, -1, 1))
    return kernels.vjp_batch(config._sizes, config._act, w, X, V)[0, :, 0]


def weight_factors(config, w, X, family, mask=None):
    """Batched weight-space Fisher factors, shape ``(B, N_sel, d)``.

    Column ``j`` of each factor is the VJP of the network at that input with
    the ``j``-th column of the output-space factor as cotangent, so the full
    Jacobian is never formed.
    """
    w = check_weights(config, w)
    X = _check_inputs(config, X)
    if family.dim != config.n_out:
        raise InvalidArgument(
            f"family dimension {family.dim} does not match network output {config.n_out}"
        )
    theta = kernels.forward_batch(config._sizes, config._act, w, X)
    Ltheta = np.ascontiguousarray(family.fisher_factor(theta))
    Lw = kernels.vjp_batch(config._sizes, config._act, w, X, Ltheta)
    if mask is not None:
        mask.validate(config.n_weights)
        Lw = Lw[:, mask.indices, :]
    return Lw


def fisher_weight_factor(config, w, x, family, mask=None):
    """Factor ``L_w`` (``N_sel x d``) of the weight-space Fisher at a single input."""
    if np.ndim(x) != 1:
        raise InvalidArgument("fisher_weight_factor takes a single input")
    return weight_factors(config, w, x, family, mask)[0]


def last_layers_mask(config, fraction):
    """Mask selecting the trailing ``max(1, ceil(fraction * n_layers))`` layers."""
    if not 0.0 < fraction <= 1.0:
        raise InvalidArgument("fraction must lie in (0, 1]")
    # the epsilon keeps products like 0.15 * 20 from rounding up a layer
    n = max(1, math.ceil(fraction * config.n_layers - 1e-9))
    n = min(n, config.n_layers)
    slices = config.layer_slices()[-n:]
    start = slices[0][0].start
    return WeightMask(np.arange(start, config.n_weights))


def init_weights(config, rng):
    """Glorot-uniform weights, zero biases."""
    w = np.zeros(config.n_weights)
    for (ws, _), (a, b) in zip(config.layer_slices(), zip(config.layer_sizes[:-1], config.layer_sizes[1:])):
        lim = np.sqrt(6.0 / (a + b))
        w[ws] = rng.uniform(-lim, lim, size=a * b)
    return w


def nll_gradient(config, w, X, Y, family):
    """Mean negative log-likelihood over the batch and its gradient in ``w``."""
    theta = kernels.forward_batch(config._sizes, config._act, w, X)
    if not np.all(np.isfinite(theta)):
        return np.nan, np.full_like(w, np.nan)
    loss = -np.mean(family.log_prob(theta, Y))
    G = family.nll_grad(theta, Y) / X.shape[0]
    g = kernels.vjp_batch(config._sizes, config._act, w, X, np.ascontiguousarray(G[:, :, None]))
    return loss, g[:, :, 0].sum(axis=0)


def train_sgd(config, X, Y, family, epochs, lr, rng, batch_size=32, w0=None):
    """Plain mini-batch SGD on the mean negative log-likelihood.

    Labels ``Y`` are targets in the family's support, one row per input.
    Raises ``TrainingDiverged`` if the loss becomes non-finite.
    """
    X = _check_inputs(config, X)
    Y = np.asarray(Y, dtype=float)
    if X.shape[0] == 0:
        raise InvalidArgument("training set is empty")
    if Y.shape[0] != X.shape[0]:
        raise InvalidArgument("inputs and targets have different row counts")
    if family.kind != "gaussian_fixed_diag":
        Y = Y.reshape(X.shape[0])
    else:
        Y = Y.reshape(X.shape[0], family.dim)
    w = init_weights(config, rng) if w0 is None else check_weights(config, w0).copy()
    M = X.shape[0]
    loss = float("nan")
    for epoch in range(epochs):
        order = rng.permutation(M)
        for start in range(0, M, batch_size):
            idx = order[start:start + batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, g = nll_gradient(config, w, X[idx], Y[idx], family)
            if not np.isfinite(loss) or not np.all(np.isfinite(g)):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            w -= lr * g
            if not np.all(np.isfinite(w)):
                raise TrainingDiverged(f"non-finite weights at epoch {epoch}")
        if epoch % max(1, epochs // 10) == 0:
            log.debug("epoch %d loss %.6g", epoch, loss)
    return w
