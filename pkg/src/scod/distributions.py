"""Output-distribution families and their Fisher information factors.

A family maps a parameter vector ``theta`` (the network output) to a
distribution over targets. Each family provides its log-density, a sampler,
the exact KL divergence, entropy, the score function, and a square-root
factor ``L`` of its Fisher information with ``L @ L.T == F(theta)``.

All methods accept a leading batch dimension on ``theta`` where noted.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

from .errors import InvalidArgument

GAUSSIAN = "gaussian_fixed_diag"
BERNOULLI = "bernoulli_logit"
CATEGORICAL = "categorical_logits"

_LOG_2PI = np.log(2.0 * np.pi)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    return np.exp(_log_sigmoid(x))


class DistFamily:
    """Base class; concrete families override the methods below."""

    kind = None

    @property
    def dim(self):
        raise NotImplementedError

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 0:
            theta = theta.reshape(1)
        if theta.shape[-1] != self.dim:
            raise InvalidArgument(
                f"{self.kind}: expected parameter dimension {self.dim}, got {theta.shape[-1]}"
            )
        if not np.all(np.isfinite(theta)):
            raise InvalidArgument(f"{self.kind}: non-finite parameter")
        return theta

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianFixedDiag(DistFamily):
    """Gaussian with mean ``theta`` and fixed covariance ``diag(sigma)``.

    ``sigma`` holds the diagonal of the covariance matrix, so the Fisher is
    ``diag(sigma)^-1`` and its factor is ``diag(sigma)^-1/2``.
    """

    sigma: tuple

    kind = GAUSSIAN

    def __post_init__(self):
        sigma = tuple(float(s) for s in np.atleast_1d(self.sigma))
        if len(sigma) == 0 or not all(np.isfinite(s) and s > 0 for s in sigma):
            raise InvalidArgument("gaussian sigma entries must be finite and strictly positive")
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self):
        return len(self.sigma)

    @property
    def _var(self):
        return np.asarray(self.sigma)

    def to_dict(self):
        return {"kind": self.kind, "sigma": list(self.sigma)}

    def log_prob(self, theta, y):
        theta = self.check_theta(theta)
        y = np.asarray(y, dtype=float).reshape(theta.shape)
        var = self._var
        return -0.5 * np.sum((y - theta) ** 2 / var + np.log(var) + _LOG_2PI, axis=-1)

    def grad_log_prob(self, theta, y):
        theta = self.check_theta(theta)
        return (np.asarray(y, dtype=float) - theta) / self._var

    def sample(self, theta, rng, size=None):
        theta = self.check_theta(theta)
        shape = theta.shape if size is None else (size,) + theta.shape
        return theta + np.sqrt(self._var) * rng.standard_normal(shape)

    def kl(self, theta1, theta2):
        theta1, theta2 = self.check_theta(theta1), self.check_theta(theta2)
        return 0.5 * np.sum((theta1 - theta2) ** 2 / self._var, axis=-1)

    def entropy(self, theta):
        theta = self.check_theta(theta)
        h = 0.5 * np.sum(np.log(2.0 * np.pi * np.e * self._var))
        return np.full(theta.shape[:-1], h) if theta.ndim > 1 else float(h)

    def fisher(self, theta):
        theta = self.check_theta(theta)
        return np.broadcast_to(np.diag(1.0 / self._var), theta.shape[:-1] + (self.dim, self.dim)).copy()

    def fisher_factor(self, theta):
        theta = self.check_theta(theta)
        L = np.diag(self._var ** -0.5)
        return np.broadcast_to(L, theta.shape[:-1] + (self.dim, self.dim)).copy()

    def nll_grad(self, theta, y):
        return -self.grad_log_prob(theta, y)


@dataclass(frozen=True)
class BernoulliLogit(DistFamily):
    """Bernoulli over {0, 1} with ``P(y=1) = sigmoid(theta)``."""

    kind = BERNOULLI

    @property
    def dim(self):
        return 1

    def to_dict(self):
        return {"kind": self.kind}

    def _check_y(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all((y == 0.0) | (y == 1.0)):
            raise InvalidArgument("bernoulli target must be 0 or 1")
        return y

    def log_prob(self, theta, y):
        theta = self.check_theta(theta)[..., 0]
        y = self._check_y(y).reshape(theta.shape)
        lp = np.where(y == 1.0, _log_sigmoid(theta), _log_sigmoid(-theta))
        return np.maximum(lp, np.log(1e-300))

    def grad_log_prob(self, theta, y):
        theta = self.check_theta(theta)
        y = self._check_y(y).reshape(theta.shape[:-1])
        return (y - _sigmoid(theta[..., 0]))[..., None]

    def sample(self, theta, rng, size=None):
        theta = self.check_theta(theta)[..., 0]
        shape = theta.shape if size is None else (size,) + theta.shape
        return (rng.random(shape) < _sigmoid(theta)).astype(float)

    def kl(self, theta1, theta2):
        t1 = self.check_theta(theta1)[..., 0]
        t2 = self.check_theta(theta2)[..., 0]
        p1 = _sigmoid(t1)
        return p1 * (_log_sigmoid(t1) - _log_sigmoid(t2)) + (1.0 - p1) * (
            _log_sigmoid(-t1) - _log_sigmoid(-t2)
        )

    def entropy(self, theta):
        t = self.check_theta(theta)[..., 0]
        p, q = _sigmoid(t), _sigmoid(-t)
        return -(p * _log_sigmoid(t) + q * _log_sigmoid(-t))

    def fisher(self, theta):
        t = self.check_theta(theta)[..., 0]
        p = _sigmoid(t)
        return (p * (1.0 - p))[..., None, None]

    def fisher_factor(self, theta):
        t = self.check_theta(theta)[..., 0]
        # p(1-p) without cancellation for large |t|
        return np.sqrt(_sigmoid(t) * _sigmoid(-t))[..., None, None]

    def nll_grad(self, theta, y):
        return -self.grad_log_prob(theta, y)


@dataclass(frozen=True)
class CategoricalLogits(DistFamily):
    """Categorical over ``{0, ..., d-1}`` with ``P(y=k) = softmax(theta)_k``."""

    n_classes: int

    kind = CATEGORICAL

    def __post_init__(self):
        if int(self.n_classes) < 2:
            raise InvalidArgument("categorical family needs at least 2 classes")
        object.__setattr__(self, "n_classes", int(self.n_classes))

    @property
    def dim(self):
        return self.n_classes

    def to_dict(self):
        return {"kind": self.kind, "dim": self.n_classes}

    def _check_y(self, y, batch_shape):
        y = np.asarray(y, dtype=float)
        yi = y.astype(np.int64)
        if np.any(yi != y) or np.any(yi < 0) or np.any(yi >= self.n_classes):
            raise InvalidArgument(f"categorical target must be an integer in [0, {self.n_classes})")
        return yi.reshape(batch_shape)

    def log_prob(self, theta, y):
        theta = self.check_theta(theta)
        y = self._check_y(y, theta.shape[:-1])
        logp = log_softmax(theta, axis=-1)
        lp = np.take_along_axis(logp, y[..., None], axis=-1)[..., 0]
        return np.maximum(lp, np.log(1e-300))

    def grad_log_prob(self, theta, y):
        theta = self.check_theta(theta)
        y = self._check_y(y, theta.shape[:-1])
        onehot = np.eye(self.n_classes)[y]
        return onehot - softmax(theta, axis=-1)

    def sample(self, theta, rng, size=None):
        theta = self.check_theta(theta)
        p = softmax(theta, axis=-1)
        shape = theta.shape[:-1] if size is None else (size,) + theta.shape[:-1]
        u = rng.random(shape + (1,))
        cdf = np.cumsum(p, axis=-1)
        idx = np.sum(u >= cdf[..., :-1], axis=-1)
        return idx.astype(float)

    def kl(self, theta1, theta2):
        t1, t2 = self.check_theta(theta1), self.check_theta(theta2)
        l1, l2 = log_softmax(t1, axis=-1), log_softmax(t2, axis=-1)
        return np.sum(np.exp(l1) * (l1 - l2), axis=-1)

    def entropy(self, theta):
        t = self.check_theta(theta)
        logp = log_softmax(t, axis=-1)
        return -np.sum(np.exp(logp) * logp, axis=-1)

    def fisher(self, theta):
        p = softmax(self.check_theta(theta), axis=-1)
        return np.einsum("...i,ij->...ij", p, np.eye(self.dim)) - p[..., :, None] * p[..., None, :]

    def fisher_factor(self, theta):
        # (I - p 1^T) diag(sqrt p); the Gram matrix is diag(p) - p p^T.
        p = softmax(self.check_theta(theta), axis=-1)
        sq = np.sqrt(p)
        eye = np.eye(self.dim)
        return (eye - p[..., :, None]) * sq[..., None, :]

    def nll_grad(self, theta, y):
        return -self.grad_log_prob(theta, y)


def family_from_dict(spec):
    """Build a family from its config-file form.

    >>> family_from_dict({"kind": "categorical_logits", "dim": 3}).dim
    3
    """
    kind = spec.get("kind")
    if kind == GAUSSIAN:
        return GaussianFixedDiag(tuple(spec["sigma"]))
    if kind == BERNOULLI:
        return BernoulliLogit()
    if kind == CATEGORICAL:
        return CategoricalLogits(int(spec["dim"]))
    raise InvalidArgument(f"unknown family kind {kind!r}")


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def fisher_theta_factor(family, theta):
    """Factor ``L`` with ``L @ L.T`` equal to the family's Fisher at ``theta``."""
    theta = family.check_theta(theta)
    return family.fisher_factor(theta)


def log_prob(family, theta, y):
    return _scalar(family.log_prob(theta, y))


def sample(family, theta, rng):
    return family.sample(theta, rng)


def kl(family, theta1, theta2):
    """Exact ``KL(P(theta1) || P(theta2))``."""
    return _scalar(family.kl(theta1, theta2))


def entropy(family, theta):
    """Shannon entropy in nats."""
    return _scalar(family.entropy(theta))


def mc_fisher_theta(family, theta, n, rng):
    """Monte-Carlo Fisher: mean outer product of scores at ``n`` model samples."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    theta = family.check_theta(theta)
    ys = family.sample(theta, rng, size=n)
    g = family.grad_log_prob(np.broadcast_to(theta, (n, family.dim)), ys)
    return g.T @ g / n
