"""Detection metrics with OoD as the positive class."""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidArgument


def _sides(in_scores, out_scores):
    a = np.asarray(in_scores, dtype=float).ravel()
    b = np.asarray(out_scores, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise InvalidArgument("both in- and out-of-distribution score sets must be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidArgument("scores must be finite")
    return a, b


def auroc(in_scores, out_scores):
    """P(out score > in score), ties counted one half (Mann-Whitney U / n_in n_out)."""
    a, b = _sides(in_scores, out_scores)
    ranks = rankdata(np.concatenate([a, b]))
    u = ranks[a.size:].sum() - b.size * (b.size + 1) / 2.0
    return float(u / (a.size * b.size))


def _pr_steps(a, b):
    scores = np.concatenate([a, b])
    labels = np.concatenate([np.zeros(a.size), np.ones(b.size)])
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    tp = np.cumsum(labels)
    fp = np.cumsum(1.0 - labels)
    # one operating point per distinct threshold
    last = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    tp, fp = tp[last], fp[last]
    return tp / (tp + fp), tp, scores[last]


def aupr(in_scores, out_scores):
    """Average precision: sum over thresholds of (recall step) * precision."""
    a, b = _sides(in_scores, out_scores)
    precision, tp, _ = _pr_steps(a, b)
    # integer recall steps keep perfect separation at exactly 1.0
    return float(np.sum(np.diff(np.r_[0.0, tp]) * precision) / b.size)


def roc_curve(in_scores, out_scores):
    """``(fpr, tpr)`` points from the strictest threshold down, starting at (0, 0)."""
    a, b = _sides(in_scores, out_scores)
    scores = np.concatenate([a, b])
    labels = np.concatenate([np.zeros(a.size), np.ones(b.size)])
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    last = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    tpr = np.cumsum(labels)[last] / b.size
    fpr = np.cumsum(1.0 - labels)[last] / a.size
    return np.r_[0.0, fpr], np.r_[0.0, tpr]


def pr_curve(in_scores, out_scores):
    """``(recall, precision)`` points, one per distinct threshold."""
    a, b = _sides(in_scores, out_scores)
    precision, tp, _ = _pr_steps(a, b)
    return tp / b.size, precision


METRICS = {"auroc": auroc, "aupr": aupr}


def bootstrap_ci(in_scores, out_scores, metric="auroc", n_boot=1000, conf=0.95, rng=None):
    """Percentile bootstrap interval, resampling each side independently."""
    a, b = _sides(in_scores, out_scores)
    if n_boot < 100:
        raise InvalidArgument("n_boot must be at least 100")
    if not 0.0 < conf < 1.0:
        raise InvalidArgument("conf must lie in (0, 1)")
    fn = METRICS[metric] if isinstance(metric, str) else metric
    rng = np.random.default_rng(rng)
    ia = rng.integers(0, a.size, size=(n_boot, a.size))
    ib = rng.integers(0, b.size, size=(n_boot, b.size))
    stats = np.array([fn(a[i], b[j]) for i, j in zip(ia, ib)])
    alpha = (1.0 - conf) / 2.0
    lo, hi = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


@dataclass
class EvalReport:
    auroc: float
    auroc_ci_low: float
    auroc_ci_high: float
    aupr: float
    aupr_ci_low: float
    aupr_ci_high: float
    n_in: int
    n_out: int
    n_boot: int
    conf: float
    seed: int

    def to_text(self):
        """``key: value`` lines in a fixed order (see README for the schema)."""
        lines = []
        for key, value in asdict(self).items():
            lines.append(f"{key}: {value!r}" if isinstance(value, float) else f"{key}: {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        fields = {}
        for line in text.splitlines():
            if line.strip():
                key, value = line.split(":", 1)
                fields[key.strip()] = value.strip()
        kinds = cls.__annotations__
        return cls(**{k: (int(v) if kinds[k] is int else float(v)) for k, v in fields.items()})


def evaluate(in_scores, out_scores, n_boot=1000, conf=0.95, seed=0):
    a, b = _sides(in_scores, out_scores)
    rng = np.random.default_rng(seed)
    auroc_lo, auroc_hi = bootstrap_ci(a, b, "auroc", n_boot, conf, rng)
    aupr_lo, aupr_hi = bootstrap_ci(a, b, "aupr", n_boot, conf, rng)
    point_auroc, point_aupr = auroc(a, b), aupr(a, b)
    return EvalReport(
        auroc=point_auroc,
        auroc_ci_low=min(auroc_lo, point_auroc),
        auroc_ci_high=max(auroc_hi, point_auroc),
        aupr=point_aupr,
        aupr_ci_low=min(aupr_lo, point_aupr),
        aupr_ci_high=max(aupr_hi, point_aupr),
        n_in=int(a.size),
        n_out=int(b.size),
        n_boot=int(n_boot),
        conf=float(conf),
        seed=int(seed),
    )


def naive_score(family, theta):
    """Constant 1 for regression heads, predictive entropy otherwise."""
    if family.kind == "gaussian_fixed_diag":
        return 1.0
    return float(family.entropy(theta))


def label_by_error(preds, targets, cov, threshold):
    """Boolean array, True where the Mahalanobis error exceeds ``threshold`` (OoD)."""
    preds = np.atleast_2d(np.asarray(preds, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if preds.shape != targets.shape or cov.shape != (preds.shape[1], preds.shape[1]):
        raise InvalidArgument("prediction, target and covariance shapes disagree")
    if not np.allclose(cov, cov.T):
        raise InvalidArgument("covariance must be symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgument("covariance must be positive definite") from exc
    z = np.linalg.solve(chol, (preds - targets).T)
    dist = np.sqrt(np.sum(z * z, axis=0))
    return dist > threshold
