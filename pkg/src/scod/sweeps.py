"""Rank/budget and prior-scale sweeps over a fitted model."""
import logging

import numpy as np

from . import model as mdl
from .evaluation import auroc
from .monitor import _normalize_mask, _scores_from_factors, sketch_dataset
from .sketch import budget_split, fixed_rank_sym, make_srft

log = logging.getLogger(__name__)


def _factors(config, w, family, X, mask):
    return mdl.weight_factors(config, w, np.asarray(X, dtype=float).reshape(-1, config.n_in), family, mask)


def sweep_rank(config, w, family, X_train, X_in, X_out, T_list, k_list, eps2=1.0, seed=0, mask=None):
    """AUROC for every feasible ``(T, k)``; one sketch per ``T``, shared across ``k``.

    Returns a list of ``(T, k, auroc)`` rows. Infeasible pairs are skipped
    with a warning.
    """
    mask = _normalize_mask(config, mask)
    n_sel = config.n_weights if mask is None else len(mask)
    M = np.asarray(X_train).reshape(-1, config.n_in).shape[0]
    L_in = _factors(config, w, family, X_in, mask)
    L_out = _factors(config, w, family, X_out, mask)
    rows = []
    for T in T_list:
        if T < 7 or T > n_sel:
            log.warning("skipping T=%d: budget must lie in [7, N=%d]", T, n_sel)
            continue
        r, _ = budget_split(T)
        ks = [k for k in k_list if 0 <= k <= 2 * r]
        for k in k_list:
            if k not in ks:
                log.warning("skipping (T=%d, k=%d): k exceeds 2r=%d", T, k, 2 * r)
        if not ks:
            continue
        op = make_srft(n_sel, T, seed)
        acc = sketch_dataset(config, w, family, X_train, op, mask)
        basis = fixed_rank_sym(acc, op, max(ks))
        for k in ks:
            U, lam = basis.U[:, :k], basis.lam[:k]
            s_in = _scores_from_factors(L_in, U, lam, eps2, M)
            s_out = _scores_from_factors(L_out, U, lam, eps2, M)
            rows.append((T, k, auroc(s_in, s_out)))
    return rows


def sweep_prior(config, w, family, X_train, X_in, X_out, eps2_list, T, k, seed=0, mask=None):
    """AUROC per prior variance, all from one fixed sketch. Rows are ``(eps2, auroc)``."""
    mask = _normalize_mask(config, mask)
    n_sel = config.n_weights if mask is None else len(mask)
    M = np.asarray(X_train).reshape(-1, config.n_in).shape[0]
    op = make_srft(n_sel, T, seed)
    acc = sketch_dataset(config, w, family, X_train, op, mask)
    basis = fixed_rank_sym(acc, op, k)
    L_in = _factors(config, w, family, X_in, mask)
    L_out = _factors(config, w, family, X_out, mask)
    rows = []
    for eps2 in eps2_list:
        s_in = _scores_from_factors(L_in, basis.U, basis.lam, eps2, M)
        s_out = _scores_from_factors(L_out, basis.U, basis.lam, eps2, M)
        rows.append((eps2, auroc(s_in, s_out)))
    return rows
