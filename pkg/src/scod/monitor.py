"""Offline curvature sketch and the online uncertainty score.

``build`` makes one pass over the training inputs, sketching the dataset
Fisher ``F_D = (1/M) sum_i L_i L_i^T`` where ``L_i`` is the weight-space
Fisher factor at input ``i``. ``uncertainty`` then scores a new input with

    eps2 * ||L||_F^2 - eps2 * ||diag(sqrt(lam / (lam + 1/(2 M eps2)))) U^T L||_F^2

which equals ``trace(F_x Sigma)`` for the posterior covariance
``Sigma = 1/2 (M F_D + 1/(2 eps2) I)^-1`` when ``(U, lam)`` is the exact
eigendecomposition, and over-estimates it when the basis is truncated.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from . import model as mdl
from .errors import InvalidArgument
from .sketch import LowRankPSD, SketchAccumulator, budget_split, fixed_rank_sym, make_srft

log = logging.getLogger(__name__)

CHUNK = 256
DENSE_LIMIT = 4000


@dataclass(frozen=True)
class Monitor:
    config: mdl.ModelConfig
    weights: np.ndarray
    family: object
    basis: LowRankPSD
    eps2: float = 1.0
    M: int = 1
    mask: mdl.WeightMask = None
    T: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.eps2 > 0:
            raise InvalidArgument("eps2 must be positive")
        if self.M < 1:
            raise InvalidArgument("M must be at least 1")
        n_sel = self.config.n_weights if self.mask is None else len(self.mask)
        if self.basis.N != n_sel:
            raise InvalidArgument(
                f"basis has {self.basis.N} rows but the (masked) weight space has {n_sel}"
            )

    @property
    def k(self):
        return self.basis.k

    def with_eps2(self, eps2):
        return replace(self, eps2=float(eps2))

    def truncate(self, k):
        return replace(self, basis=self.basis.truncate(k))

    def factors(self, X):
        return mdl.weight_factors(self.config, self.weights, X, self.family, self.mask)


def _normalize_mask(config, mask):
    # a mask covering every weight is the same as no mask
    if mask is not None and len(mask) == config.n_weights:
        return None
    return mask


def sketch_dataset(config, w, family, X, op, mask=None, chunk=CHUNK):
    """One pass over the inputs ``X`` accumulating the sketch with weight ``1/M``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if config.n_in == 1 else X[None, :]
    M = X.shape[0]
    if M == 0:
        raise InvalidArgument("dataset is empty")
    acc = SketchAccumulator(op)
    for start in range(0, M, chunk):
        L = mdl.weight_factors(config, w, X[start:start + chunk], family, mask)
        acc.update(L, 1.0 / M)
        log.debug("sketched %d/%d inputs", min(start + chunk, M), M)
    return acc


def build(config, w, family, X, T, k, eps2=1.0, seed=0, mask=None):
    """Sketch the dataset Fisher over inputs ``X`` and return a rank-``k`` monitor.

    Dataset labels play no part: the Fisher is an expectation over the
    model's own predictive distribution.
    """
    mask = _normalize_mask(config, mask)
    w = mdl.check_weights(config, w)
    r, _ = budget_split(T)
    if k > 2 * r:
        raise InvalidArgument(f"k={k} exceeds 2*floor((T-1)/3)={2 * r}")
    n_sel = config.n_weights if mask is None else len(mask)
    op = make_srft(n_sel, T, seed)
    acc = sketch_dataset(config, w, family, X, op, mask)
    basis = fixed_rank_sym(acc, op, k)
    log.info("sketch built: M=%d N=%d T=%d k=%d top eigenvalues %s",
             acc.count, n_sel, T, k, np.array2string(basis.lam[:5], precision=4))
    return Monitor(config, w, family, basis, float(eps2), acc.count, mask, T, seed)


def _scores_from_factors(L, U, lam, eps2, M):
    scale = np.sqrt(lam / (lam + 1.0 / (2.0 * M * eps2)))
    total = np.sum(L * L, axis=(1, 2))
    if lam.size == 0:
        return eps2 * total
    proj = np.einsum("nk,bnd->bkd", U, L) * scale[None, :, None]
    return eps2 * total - eps2 * np.sum(proj * proj, axis=(1, 2))


def uncertainty_batch(monitor, X, chunk=CHUNK):
    """Scores for every row of ``X``, order preserved."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if monitor.config.n_in == 1 else X[None, :]
    if X.shape[0] == 0:
        return np.zeros(0)
    if not np.all(np.isfinite(X)):
        raise InvalidArgument("inputs must be finite")
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        L = monitor.factors(X[start:start + chunk])
        out[start:start + L.shape[0]] = _scores_from_factors(
            L, monitor.basis.U, monitor.basis.lam, monitor.eps2, monitor.M
        )
    return out


def uncertainty(monitor, x):
    """Expected KL change of the predictive at ``x`` under posterior weight noise."""
    x = np.asarray(x, dtype=float).reshape(1, monitor.config.n_in)
    return float(uncertainty_batch(monitor, x)[0])


def naive_scores(monitor, X):
    """The Naive baseline applied to the monitor's model."""
    from .evaluation import naive_score

    theta = mdl.forward(monitor.config, monitor.weights, np.asarray(X, dtype=float).reshape(-1, monitor.config.n_in))
    return np.array([naive_score(monitor.family, t) for t in theta])


# ------------------------------------------------------------ dense oracles


def _jacobian(config, w, x):
    d = config.n_out
    return np.stack([mdl.vjp(config, w, x, e) for e in np.eye(d)])


def dense_weight_fisher(config, w, family, x, mask=None):
    """``J^T F_theta J`` at one input, built from the full Jacobian."""
    J = _jacobian(config, w, x)
    if mask is not None:
        J = J[:, mask.indices]
    theta = mdl.forward(config, w, x)
    return J.T @ family.fisher(theta) @ J


def dense_dataset_fisher(config, w, family, X, mask=None):
    n_sel = config.n_weights if mask is None else len(mask)
    if n_sel > DENSE_LIMIT:
        raise InvalidArgument(f"refusing to materialize a {n_sel}x{n_sel} Fisher")
    X = np.asarray(X, dtype=float).reshape(-1, config.n_in)
    F = np.zeros((n_sel, n_sel))
    for x in X:
        F += dense_weight_fisher(config, w, family, x, mask)
    return F / X.shape[0]


def exact_basis(F, k=None, tol=0.0):
    """Top-``k`` eigenpairs of a dense PSD matrix, as a ``LowRankPSD``.

    With ``k=None`` every eigenvalue above ``tol * max_eigenvalue`` is kept.
    """
    lam, V = np.linalg.eigh(0.5 * (F + F.T))
    order = np.argsort(lam, kind="stable")[::-1]
    lam, V = np.clip(lam[order], 0.0, None), V[:, order]
    if k is None:
        k = int(np.sum(lam > tol * max(lam[0], 0.0))) if lam[0] > 0 else 0
    return LowRankPSD(V[:, :k], lam[:k])


def uncertainty_dense_oracle(config, w, family, X, eps2, x, mask=None):
    """``trace(F_x Sigma)`` with ``Sigma = 1/2 (M F_D + I/(2 eps2))^-1``, all dense."""
    X = np.asarray(X, dtype=float).reshape(-1, config.n_in)
    M = X.shape[0]
    FD = dense_dataset_fisher(config, w, family, X, mask)
    n = FD.shape[0]
    Sigma = 0.5 * np.linalg.inv(M * FD + np.eye(n) / (2.0 * eps2))
    Fx = dense_weight_fisher(config, w, family, np.asarray(x, dtype=float), mask)
    return float(np.trace(Fx @ Sigma))


def error_bound(monitor, x, lambda_k, rank_fd):
    """Upper bound on the over-estimate from keeping only ``monitor.k`` eigenpairs.

    ``eps2 * ||L||_F^2 * (rank_fd - k) * lambda_k / (lambda_k + 1/(2 M eps2))``
    where ``lambda_k`` is the smallest retained eigenvalue.
    """
    if lambda_k < 0:
        raise InvalidArgument("lambda_k must be non-negative")
    k = monitor.k
    if rank_fd < k:
        raise InvalidArgument(f"rank_fd={rank_fd} is smaller than k={k}")
    L = monitor.factors(np.asarray(x, dtype=float).reshape(1, monitor.config.n_in))[0]
    eps2, M = monitor.eps2, monitor.M
    return float(eps2 * np.sum(L * L) * (rank_fd - k) * lambda_k / (lambda_k + 1.0 / (2.0 * M * eps2)))
