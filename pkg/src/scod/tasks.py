"""Desk-scale synthetic tasks with disjoint in- and out-of-distribution inputs."""
from dataclasses import asdict, dataclass

import numpy as np

from .distributions import CategoricalLogits, GaussianFixedDiag
from .errors import InvalidArgument
from .model import ModelConfig

SINE = "sine-regression"
CLUSTERS = "cluster-classification"

# in-distribution clusters sit on a radius-3 circle; the two held-out clusters
# sit between them on the same circle, far enough that unit disks never touch
_IN_ANGLES = (90.0, 210.0, 330.0)
_OUT_ANGLES = (30.0, 150.0)
_RADIUS = 3.0
_CLUSTER_SPREAD = 1.0


@dataclass(frozen=True)
class TaskSpec:
    kind: str = SINE
    n_train: int = 200
    n_in_test: int = 100
    n_out_test: int = 300
    noise: float = 0.1
    seed: int = 0
    in_range: tuple = (-2.0, 2.0)
    out_range: tuple = (4.0, 8.0)

    def __post_init__(self):
        if self.kind not in (SINE, CLUSTERS):
            raise InvalidArgument(f"unknown task kind {self.kind!r}")
        if min(self.n_train, self.n_in_test, self.n_out_test) < 1:
            raise InvalidArgument("every split needs at least one sample")
        lo, hi = self.in_range
        olo, ohi = self.out_range
        if self.kind == SINE and not (hi < olo or ohi < lo):
            raise InvalidArgument("in and out input ranges must be disjoint")

    def to_dict(self):
        return asdict(self)


def _disk(rng, center, n):
    r = _CLUSTER_SPREAD * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    return np.asarray(center) + np.c_[r * np.cos(phi), r * np.sin(phi)]


def _clusters(rng, angles, n, label_offset):
    labels = rng.integers(0, len(angles), size=n)
    X = np.empty((n, 2))
    for j, ang in enumerate(angles):
        sel = labels == j
        a = np.deg2rad(ang)
        X[sel] = _disk(rng, (_RADIUS * np.cos(a), _RADIUS * np.sin(a)), int(sel.sum()))
    return X, (labels + label_offset).astype(float)[:, None]


def generate(spec):
    """``{"train", "in_test", "out_test"}`` -> ``(X, Y)`` arrays.

    Sine targets are ``sin(x)`` plus Gaussian noise of std ``spec.noise``.
    Cluster targets are class ids; the held-out clusters carry ids 3 and 4,
    outside the trained model's support.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.kind == SINE:
        def split(n, bounds):
            x = rng.uniform(*bounds, size=(n, 1))
            return x, np.sin(x) + spec.noise * rng.standard_normal((n, 1))

        return {
            "train": split(spec.n_train, spec.in_range),
            "in_test": split(spec.n_in_test, spec.in_range),
            "out_test": split(spec.n_out_test, spec.out_range),
        }
    return {
        "train": _clusters(rng, _IN_ANGLES, spec.n_train, 0),
        "in_test": _clusters(rng, _IN_ANGLES, spec.n_in_test, 0),
        "out_test": _clusters(rng, _OUT_ANGLES, spec.n_out_test, len(_IN_ANGLES)),
    }


def default_model(kind, hidden=(16, 16), activation="relu"):
    """Architecture and output family used for a task."""
    if kind == SINE:
        return ModelConfig((1,) + tuple(hidden) + (1,), activation), GaussianFixedDiag((1.0,))
    if kind == CLUSTERS:
        n = len(_IN_ANGLES)
        return ModelConfig((2,) + tuple(hidden) + (n,), activation), CategoricalLogits(n)
    raise InvalidArgument(f"unknown task kind {kind!r}")
