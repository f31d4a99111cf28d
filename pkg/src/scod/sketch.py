"""Two-sided randomized sketching of a PSD matrix given as a sum of
low-rank terms, and fixed-rank symmetric reconstruction.

The matrix being sketched is ``A = sum_i weight_i * L_i @ L_i.T``. The
accumulator only ever stores ``Y = A @ Omega.T`` (``N x r``) and
``W = Psi @ A`` (``s x N``); no ``N x N`` array is allocated on the update
path.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import IncompatibleSketch, InvalidArgument


def budget_split(T):
    """Split a sketch budget ``T`` into range/co-range sizes ``(r, s)``."""
    r = (T - 1) // 3
    return r, T - r


@dataclass(frozen=True, eq=False)
class SRFTOperator:
    """Pair of subsampled randomized cosine-transform maps.

    ``Omega = P1 C diag(d1)`` and ``Psi = P2 C diag(d2)`` where ``C`` is the
    orthonormal DCT-II on length-``N`` columns, ``d1, d2`` are Rademacher
    sign vectors and ``P1, P2`` pick rows ``idx1`` / ``idx2``.
    """

    N: int
    d1: np.ndarray
    d2: np.ndarray
    idx1: np.ndarray
    idx2: np.ndarray
    seed: int = 0

    kind = "srft"

    def __post_init__(self):
        for name in ("d1", "d2"):
            d = np.asarray(getattr(self, name), dtype=float)
            if d.shape != (self.N,) or not np.all(np.abs(d) == 1.0):
                raise InvalidArgument(f"{name} must be a length-N vector of +-1")
            d.setflags(write=False)
            object.__setattr__(self, name, d)
        for name in ("idx1", "idx2"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            if idx.ndim != 1 or idx.size < 1 or np.unique(idx).size != idx.size:
                raise InvalidArgument(f"{name} must hold distinct row indices")
            if idx.min() < 0 or idx.max() >= self.N:
                raise InvalidArgument(f"{name} out of range")
            idx.setflags(write=False)
            object.__setattr__(self, name, idx)

    @property
    def r(self):
        return self.idx1.size

    @property
    def s(self):
        return self.idx2.size

    @property
    def T(self):
        return self.r + self.s

    def key(self):
        return (self.kind, self.N, self.T, self.seed)

    def same_as(self, other):
        if self is other:
            return True
        return (
            isinstance(other, SRFTOperator)
            and self.key() == other.key()
            and np.array_equal(self.d1, other.d1)
            and np.array_equal(self.d2, other.d2)
            and np.array_equal(self.idx1, other.idx1)
            and np.array_equal(self.idx2, other.idx2)
        )

    def apply(self, which, L):
        signs, rows = (self.d1, self.idx1) if which == "omega" else (self.d2, self.idx2)
        return scipy.fft.dct(signs[:, None] * L, type=2, norm="ortho", axis=0)[rows]

    def dense(self, which):
        """Materialize ``Omega`` or ``Psi`` explicitly (test-scale only)."""
        return self.apply(which, np.eye(self.N))


@dataclass(frozen=True, eq=False)
class GaussianOperator:
    """Dense i.i.d. standard-normal sketching maps; a cross-check path."""

    N: int
    omega: np.ndarray
    psi: np.ndarray
    seed: int = 0

    kind = "gaussian"

    @property
    def r(self):
        return self.omega.shape[0]

    @property
    def s(self):
        return self.psi.shape[0]

    @property
    def T(self):
        return self.r + self.s

    def key(self):
        return (self.kind, self.N, self.T, self.seed)

    def same_as(self, other):
        if self is other:
            return True
        return (
            isinstance(other, GaussianOperator)
            and self.key() == other.key()
            and np.array_equal(self.omega, other.omega)
            and np.array_equal(self.psi, other.psi)
        )

    def apply(self, which, L):
        return (self.omega if which == "omega" else self.psi) @ L

    def dense(self, which):
        return (self.omega if which == "omega" else self.psi).copy()


def _check_budget(N, T):
    if T < 7:
        raise InvalidArgument(f"sketch budget T={T} must be at least 7")
    if T > N:
        raise InvalidArgument(f"sketch budget T={T} exceeds dimension N={N}")


def make_srft(N, T, seed):
    """Draw an SRFT operator pair for an ``N``-dimensional matrix with budget ``T``."""
    _check_budget(N, T)
    r, s = budget_split(T)
    rng = np.random.default_rng(seed)
    d1 = rng.choice([-1.0, 1.0], size=N)
    d2 = rng.choice([-1.0, 1.0], size=N)
    idx1 = np.sort(rng.choice(N, size=r, replace=False))
    idx2 = np.sort(rng.choice(N, size=s, replace=False))
    return SRFTOperator(N, d1, d2, idx1, idx2, seed)


def make_gaussian_operator(N, T, seed):
    _check_budget(N, T)
    r, s = budget_split(T)
    rng = np.random.default_rng(seed)
    return GaussianOperator(N, rng.standard_normal((r, N)), rng.standard_normal((s, N)), seed)


def apply_sketch_left(op, which, L):
    """``Omega @ L`` (``which="omega"``) or ``Psi @ L`` (``which="psi"``)."""
    if which not in ("omega", "psi"):
        raise InvalidArgument("which must be 'omega' or 'psi'")
    L = np.asarray(L, dtype=float)
    if L.ndim == 1:
        L = L[:, None]
    if L.ndim != 2 or L.shape[0] != op.N:
        raise InvalidArgument(f"expected {op.N} rows, got shape {L.shape}")
    return op.apply(which, L)


@dataclass
class SketchAccumulator:
    """Streaming sketch ``(Y, W)`` of a weighted sum of ``L_i L_i^T`` terms."""

    op: object
    Y: np.ndarray = field(default=None)
    W: np.ndarray = field(default=None)
    count: int = 0

    def __post_init__(self):
        if self.Y is None:
            self.Y = np.zeros((self.op.N, self.op.r))
        if self.W is None:
            self.W = np.zeros((self.op.s, self.op.N))

    def update(self, L, weight=1.0):
        """Absorb ``weight * L @ L.T``.

        ``L`` may be a single ``(N, d)`` factor or a stack ``(B, N, d)``; a
        stack counts as ``B`` items and is absorbed as one concatenated factor.
        """
        L = np.asarray(L, dtype=float)
        if L.ndim == 1:
            L = L[:, None]
        n_items = 1
        if L.ndim == 3:
            n_items = L.shape[0]
            L = np.moveaxis(L, 0, 1).reshape(L.shape[1], -1)
        if L.ndim != 2 or L.shape[0] != self.op.N:
            raise InvalidArgument(f"factor must have {self.op.N} rows, got shape {L.shape}")
        OL = self.op.apply("omega", L)
        PL = self.op.apply("psi", L)
        self.Y += weight * (L @ OL.T)
        self.W += weight * (PL @ L.T)
        self.count += n_items

    def nbytes(self):
        return self.Y.nbytes + self.W.nbytes


def update(acc, L, weight=1.0):
    acc.update(L, weight)


def merge(a, b):
    """Sum of two accumulators built on the same operator."""
    if not a.op.same_as(b.op):
        raise IncompatibleSketch("accumulators were built with different sketch operators")
    return SketchAccumulator(a.op, a.Y + b.Y, a.W + b.W, a.count + b.count)


@dataclass(frozen=True)
class LowRankPSD:
    """``U @ diag(lam) @ U.T`` with orthonormal ``U`` and descending ``lam >= 0``."""

    U: np.ndarray
    lam: np.ndarray

    @property
    def k(self):
        return self.lam.size

    @property
    def N(self):
        return self.U.shape[0]

    def truncate(self, k):
        if k > self.k:
            raise InvalidArgument(f"cannot truncate rank {self.k} basis to {k}")
        return LowRankPSD(self.U[:, :k], self.lam[:k])

    def dense(self):
        return (self.U * self.lam) @ self.U.T


def fixed_rank_sym(acc, op, k):
    """Rank-``k`` symmetric eigen-approximation from a two-sided sketch.

    1. ``Q`` = orthonormal basis of ``Y``.
    2. ``X`` = least-squares solution of ``(Psi Q) X = W``.
    3. ``[Q | X^T] = U [T1 T2]`` by thin QR.
    4. Symmetrize the core ``S = (T1 T2^T + T2 T1^T) / 2``.
    5. Eigendecompose ``S``; sort descending, clip negatives, keep ``k``.

    Each eigenvector is signed so its largest-magnitude entry is positive.
    """
    r = op.r
    if not 0 <= k <= 2 * r:
        raise InvalidArgument(f"rank k={k} must lie in [0, 2r={2 * r}]")
    Q, _ = np.linalg.qr(acc.Y)
    PQ = op.apply("psi", Q)
    X = scipy.linalg.lstsq(PQ, acc.W, lapack_driver="gelsy")[0]
    U, Tm = np.linalg.qr(np.hstack([Q, X.T]))
    T1, T2 = Tm[:, :r], Tm[:, r:]
    S = 0.5 * (T1 @ T2.T + T2 @ T1.T)
    lam, V = np.linalg.eigh(S)
    order = np.argsort(lam, kind="stable")[::-1][:k]
    lam = np.clip(lam[order], 0.0, None)
    return LowRankPSD(_fix_signs(U @ V[:, order]), lam)


def _fix_signs(U):
    if U.size == 0:
        return U
    pivot = U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])]
    return U * np.where(pivot < 0, -1.0, 1.0)
