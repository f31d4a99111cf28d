import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scod import distributions as dist
from scod import model as mdl
from scod import monitor as mon
from scod import sketch as sk
from scod.errors import InvalidArgument

FAMILIES = [
    (dist.GaussianFixedDiag(np.array([0.5, 2.0])), (3, 8, 2)),
    (dist.BernoulliLogit(), (2, 10, 6, 1)),
    (dist.CategoricalLogits(3), (2, 12, 3)),
]


def small_problem(seed, fam_index=2, M=30):
    rng = np.random.default_rng(seed)
    family, sizes = FAMILIES[fam_index]
    config = mdl.ModelConfig(sizes, "tanh")
    w = rng.standard_normal(config.n_weights) * 0.8
    X = rng.normal(size=(M, sizes[0]))
    return config, family, w, X, rng


def numeric_rank(F):
    lam = np.linalg.eigvalsh(F)
    return int(np.sum(lam > 1e-10 * lam[-1]))


def exact_monitor(config, family, w, X, k=None, eps2=1.0, mask=None):
    F = mon.dense_dataset_fisher(config, w, family, X, mask)
    k = F.shape[0] if k is None else k
    return mon.Monitor(config, w, family, mon.exact_basis(F, k), eps2, X.shape[0], mask), F


def test_single_input_monitor_recovers_jtj():
    config, family, w, X, _ = small_problem(0, fam_index=0, M=1)
    m = mon.build(config, w, family, X, T=config.n_weights, k=2)
    F = mon.dense_dataset_fisher(config, w, family, X)
    ref = mon.exact_basis(F, 2)
    np.testing.assert_allclose(m.basis.lam, ref.lam, rtol=1e-8)
    np.testing.assert_allclose(np.abs(m.basis.U.T @ ref.U), np.eye(2), atol=1e-8)
    assert m.M == 1


def test_duplicated_dataset_keeps_eigenpairs():
    config, family, w, X, _ = small_problem(1)
    a = mon.build(config, w, family, X, T=40, k=8, seed=3)
    b = mon.build(config, w, family, np.vstack([X, X]), T=40, k=8, seed=3)
    assert b.M == 2 * a.M
    assert np.max(np.abs(a.basis.lam - b.basis.lam)) <= 1e-8
    assert np.max(np.abs(a.basis.U - b.basis.U)) <= 1e-8


def test_masked_monitor_lives_in_masked_space():
    config, family, w, X, _ = small_problem(2)
    mask = mdl.last_layers_mask(config, 0.5)
    m = mon.build(config, w, family, X, T=20, k=4, mask=mask)
    assert m.basis.N == len(mask)
    full = mdl.weight_factors(config, w, X[:3], family)
    np.testing.assert_array_equal(m.factors(X[:3]), full[:, mask.indices, :])


def test_full_mask_is_no_mask():
    config, family, w, X, _ = small_problem(3)
    every = mdl.WeightMask(np.arange(config.n_weights))
    a = mon.build(config, w, family, X, T=20, k=4, mask=every)
    b = mon.build(config, w, family, X, T=20, k=4)
    assert a.mask is None
    np.testing.assert_array_equal(a.basis.U, b.basis.U)


def test_build_rejects_rank_above_budget():
    config, family, w, X, _ = small_problem(4)
    with pytest.raises(InvalidArgument):
        mon.build(config, w, family, X, T=10, k=7)


def test_rank_zero_score_is_prior_trace():
    config, family, w, X, rng = small_problem(5)
    m = mon.Monitor(config, w, family, sk.LowRankPSD(np.zeros((config.n_weights, 0)), np.zeros(0)), 0.3, 30)
    for x in rng.normal(size=(5, 2)):
        L = mdl.fisher_weight_factor(config, w, x, family)
        assert mon.uncertainty(m, x) == pytest.approx(0.3 * np.sum(L * L), rel=1e-14)


def test_hand_derived_half():
    # F_D = 0.5 e1 e1^T with M = 1 and eps2 = 1; the test factor is e1.
    # Sigma = 1/2 (0.5 e1 e1^T + I/2)^-1 has 1/2 on the e1 diagonal entry.
    N = 4
    e1 = np.zeros((1, N, 1))
    e1[0, 0, 0] = 1.0
    U = np.eye(N)[:, :1]
    score = mon._scores_from_factors(e1, U, np.array([0.5]), 1.0, 1)[0]
    assert abs(score - 0.5) <= 1e-10


@pytest.mark.parametrize("fam_index", [0, 1, 2])
def test_full_rank_matches_dense_oracle(fam_index):
    config, family, w, X, rng = small_problem(10 + fam_index, fam_index)
    m, _ = exact_monitor(config, family, w, X, eps2=0.7)
    for x in rng.normal(size=(5, X.shape[1])):
        oracle = mon.uncertainty_dense_oracle(config, w, family, X, 0.7, x)
        assert abs(mon.uncertainty(m, x) - oracle) <= 1e-8 * abs(oracle)


def test_oracle_weak_prior_limit():
    config, family, w, X, rng = small_problem(6, fam_index=0)
    x = rng.normal(size=3)
    L = mdl.fisher_weight_factor(config, w, x, family)
    oracle = mon.uncertainty_dense_oracle(config, w, family, X, 1e-9, x)
    assert oracle == pytest.approx(1e-9 * np.sum(L * L), rel=1e-5)


@pytest.mark.parametrize("fam_index", [0, 2])
def test_truncation_overestimates_within_bound(fam_index):
    config, family, w, X, rng = small_problem(20 + fam_index, fam_index)
    full, F = exact_monitor(config, family, w, X)
    rank = numeric_rank(F)
    for x in rng.normal(size=(4, X.shape[1])):
        oracle = mon.uncertainty_dense_oracle(config, w, family, X, 1.0, x)
        prev = np.inf
        for k in range(1, rank + 1):
            m = full.truncate(k)
            score = mon.uncertainty(m, x)
            bound = mon.error_bound(m, x, m.basis.lam[-1], rank)
            assert score >= oracle - 1e-10
            assert score - oracle <= bound + 1e-10
            assert score <= prev + 1e-12
            prev = score


def test_prior_scale_limits():
    config, family, w, X, rng = small_problem(7)
    m, _ = exact_monitor(config, family, w, X)
    x = rng.normal(size=2)
    L = mdl.fisher_weight_factor(config, w, x, family)
    # a vanishing prior scales the score like eps2 * ||L||^2
    tiny = mon.uncertainty(m.with_eps2(1e-9), x)
    assert tiny == pytest.approx(1e-9 * np.sum(L * L), rel=1e-5)
    scores = [mon.uncertainty(m.with_eps2(e), x) for e in (1e-3, 1e-1, 1.0, 10.0)]
    assert np.all(np.diff(scores) >= 0)


def test_scores_are_non_negative_and_order_invariant():
    config, family, w, X, rng = small_problem(8)
    m = mon.build(config, w, family, X, T=30, k=9, seed=1)
    Xt = rng.normal(size=(40, 2)) * 3
    s = mon.uncertainty_batch(m, Xt)
    assert np.all(s >= 0)
    perm = rng.permutation(40)
    np.testing.assert_allclose(mon.uncertainty_batch(m, Xt[perm]), s[perm], rtol=1e-13, atol=0)
    np.testing.assert_allclose(s[:3], [mon.uncertainty(m, x) for x in Xt[:3]], rtol=1e-13)
    shuffled = mon.build(config, w, family, X[rng.permutation(30)], T=30, k=9, seed=1)
    np.testing.assert_allclose(shuffled.basis.lam, m.basis.lam, rtol=1e-9, atol=1e-12)


def test_empty_batch_scores():
    config, family, w, X, _ = small_problem(9)
    m = mon.build(config, w, family, X, T=20, k=3)
    assert mon.uncertainty_batch(m, np.zeros((0, 2))).shape == (0,)


def test_error_bound_examples():
    config, family, w, X, rng = small_problem(11)
    m, F = exact_monitor(config, family, w, X, k=3)
    x = rng.normal(size=2)
    L = mdl.fisher_weight_factor(config, w, x, family)
    c = 1.0 / (2 * 30)
    assert mon.error_bound(m, x, 0.0, 10) == 0.0
    assert mon.error_bound(m, x, 0.2, 3) == 0.0
    assert mon.error_bound(m, x, 0.2, 5) == pytest.approx(np.sum(L * L) * 2 * 0.2 / (0.2 + c), rel=1e-13)
    with pytest.raises(InvalidArgument):
        mon.error_bound(m, x, 0.2, 2)


def test_sharded_build_equals_single_pass():
    config, family, w, X, _ = small_problem(12, M=48)
    N = config.n_weights
    op = sk.make_srft(N, 31, seed=5)
    single = mon.sketch_dataset(config, w, family, X, op)
    shards = []
    for part in np.array_split(np.arange(48), 4):
        acc = sk.SketchAccumulator(op)
        acc.update(mdl.weight_factors(config, w, X[part], family), 1.0 / 48)
        shards.append(acc)
    merged = shards[0]
    for acc in shards[1:]:
        merged = sk.merge(merged, acc)
    assert merged.count == single.count == 48
    assert np.max(np.abs(merged.Y - single.Y)) <= 1e-12
    assert np.max(np.abs(merged.W - single.W)) <= 1e-12


def test_ood_scores_exceed_training_scores(sine_task):
    config, family, w, data = sine_task
    m = mon.build(config, w, family, data["train"][0], T=64, k=10)
    s_train = mon.uncertainty_batch(m, data["train"][0])
    s_out = mon.uncertainty_batch(m, data["out_test"][0])
    frac = np.mean(s_out[:, None] > s_train[None, :])
    assert frac >= 0.9


def test_naive_regression_scores_are_constant(sine_task):
    config, family, w, data = sine_task
    m = mon.build(config, w, family, data["train"][0], T=34, k=5)
    assert np.all(mon.naive_scores(m, data["out_test"][0]) == 1.0)


def test_monitor_validation():
    config, family, w, X, _ = small_problem(13)
    basis = sk.LowRankPSD(np.zeros((config.n_weights, 0)), np.zeros(0))
    with pytest.raises(InvalidArgument):
        mon.Monitor(config, w, family, basis, eps2=0.0)
    with pytest.raises(InvalidArgument):
        mon.Monitor(config, w, family, basis, M=0)
    with pytest.raises(InvalidArgument):
        mon.Monitor(config, w, family, sk.LowRankPSD(np.zeros((3, 0)), np.zeros(0)))


@settings(max_examples=25, deadline=None)
@given(
    lam=st.lists(st.floats(0.0, 1e3), min_size=1, max_size=6),
    eps2=st.floats(1e-3, 1e3),
    M=st.integers(1, 1000),
    seed=st.integers(0, 2**31),
)
def test_score_bounded_by_prior_trace(lam, eps2, M, seed):
    rng = np.random.default_rng(seed)
    N = 10
    U, _ = np.linalg.qr(rng.normal(size=(N, len(lam))))
    lam = np.sort(np.asarray(lam))[::-1]
    L = rng.normal(size=(3, N, 2))
    s = mon._scores_from_factors(L, U, lam, eps2, M)
    prior = eps2 * np.sum(L * L, axis=(1, 2))
    assert np.all(s >= -1e-9 * prior)
    assert np.all(s <= prior * (1 + 1e-12))
