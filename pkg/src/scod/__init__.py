"""Curvature-sketch out-of-distribution monitor for small probabilistic networks."""
from .distributions import BernoulliLogit, CategoricalLogits, GaussianFixedDiag, family_from_dict
from .errors import ArtifactMismatch, IncompatibleSketch, InvalidArgument, ScodError, TrainingDiverged
from .model import ModelConfig, WeightMask, fisher_weight_factor, forward, last_layers_mask, train_sgd, vjp
from .monitor import Monitor, build, error_bound, uncertainty, uncertainty_batch, uncertainty_dense_oracle
from .sketch import LowRankPSD, SketchAccumulator, fixed_rank_sym, make_gaussian_operator, make_srft, merge

__version__ = "0.1.0"
