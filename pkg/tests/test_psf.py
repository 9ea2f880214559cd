import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftfilter.data import UNLABELED, LabeledDataset, gen_periodic, make_rng, standard_normal
from driftfilter.psf import (
    EarlyStopRule, FeatureMask, PsfConfig, build_mask, loss_weights, psf_forward,
    psf_objective_and_gradient, psf_train,
)
from driftfilter.sf import TrainConfig, sf_forward
from driftfilter.verify import check_periodicity, gradient_check


def test_build_mask_examples():
    np.testing.assert_array_equal(build_mask(2, 2).m, [[1, 0], [0, 1], [0, 0]])
    m = build_mask(2, 5, [2, 2, 1])
    assert [m.group(c).tolist() for c in (1, 2)] == [[0, 1], [2, 3]]
    np.testing.assert_array_equal(m.m[2], [0, 0, 0, 0, 1])
    np.testing.assert_array_equal(build_mask(2, 5).m[2], [0, 0, 0, 0, 1])
    with pytest.raises(ValueError):
        build_mask(3, 2)


@pytest.mark.parametrize("sizes", [[1, 1, 1], [0, 2, 0], [2, -1, 1]])
def test_build_mask_bad_sizes(sizes):
    with pytest.raises(ValueError):
        build_mask(2, 2, sizes)


def test_mask_invariants():
    with pytest.raises(ValueError):
        FeatureMask([[1, 1], [1, 0], [0, 0]])
    with pytest.raises(ValueError):
        FeatureMask([[0, 0], [1, 1], [0, 0]])


def test_config_validation():
    with pytest.raises(ValueError):
        PsfConfig(nonlinearity="tanh")
    with pytest.raises(ValueError):
        PsfConfig(lam=-1.0)
    with pytest.raises(ValueError):
        PsfConfig(group_sizes=(1, 2, 1))
    assert PsfConfig(lam=0.5).lambdas(3).tolist() == [0.5, 0.5, 0.5]
    with pytest.raises(ValueError):
        PsfConfig(lam=[1.0, 2.0]).lambdas(3)
    with pytest.raises(ValueError):
        EarlyStopRule(window=0)


def test_zero_weights_give_uniform_representation():
    for l in (1, 2, 5):
        z = psf_forward(np.zeros((l, 3)), standard_normal(make_rng(0), (4, 3)),
                        PsfConfig(base=TrainConfig(n_features=l))).z
        np.testing.assert_allclose(z, 1 / math.sqrt(l), rtol=1e-15)


def test_block_loss_hand_value():
    x = standard_normal(make_rng(1), (4, 3))
    loss, _ = psf_objective_and_gradient(np.zeros((2, 3)), x, np.ones(4, dtype=int),
                                         build_mask(2, 2), PsfConfig(lam=1.0))
    assert loss == pytest.approx(4 / math.sqrt(2), rel=1e-14)


def test_zero_lambda_is_l1_objective():
    rng = make_rng(2)
    w, x = standard_normal(rng, (4, 3)), standard_normal(rng, (6, 3))
    y = np.array([1, 2, 1, UNLABELED, 2, 1])
    cfg = PsfConfig(base=TrainConfig(n_features=4), lam=0.0)
    loss, _ = psf_objective_and_gradient(w, x, y, build_mask(2, 4), cfg)
    assert loss == pytest.approx(psf_forward(w, x, cfg).z.sum(), rel=1e-14)


@given(st.integers(0, 2**31), st.floats(0, 3), st.floats(0, 3))
def test_loss_is_non_increasing_in_lambda(seed, lam1, lam2):
    rng = make_rng(seed)
    w, x = standard_normal(rng, (4, 2)), standard_normal(rng, (8, 2))
    y = rng.integers(1, 3, 8)
    mask = build_mask(2, 4)
    lo, hi = sorted((lam1, lam2))
    a, _ = psf_objective_and_gradient(w, x, y, mask, PsfConfig(base=TrainConfig(n_features=4), lam=lo))
    b, _ = psf_objective_and_gradient(w, x, y, mask, PsfConfig(base=TrainConfig(n_features=4), lam=hi))
    assert b <= a + 1e-12


def test_loss_weights_layout():
    d = loss_weights(np.array([1, 2, UNLABELED]), build_mask(2, 3, [1, 1, 1]), np.array([0.5, 2.0]))
    np.testing.assert_allclose(d, [[0.5, 1, 1], [1, -1, 1], [1, 1, 1]])
    with pytest.raises(ValueError):
        loss_weights(np.array([3]), build_mask(2, 2), np.ones(2))


@pytest.mark.parametrize("nl", ["sin", "cos"])
@given(seed=st.integers(0, 2**31))
def test_range_and_norm(nl, seed):
    rng = make_rng(seed)
    z = psf_forward(standard_normal(rng, (5, 3)), 10 * standard_normal(rng, (11, 3)),
                    PsfConfig(base=TrainConfig(n_features=5), nonlinearity=nl)).z
    assert np.all(z >= 0) and np.all(z <= 1 + 1e-12)
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-9)
    assert np.all(z.mean(axis=0) > 0) and np.all(z.var(axis=0) < 1)


def test_gradient_examples():
    assert gradient_check("psf", 4, 3, 6, seed=0).passed
    assert gradient_check("psf", 2, 3, 8, seed=1, w=np.zeros((2, 3))).passed
    for seed in range(5):
        assert gradient_check("psf", 3, 2, 7, seed=seed,
                              cfg=PsfConfig(base=TrainConfig(n_features=3), nonlinearity="cos")).passed


def test_periodicity_examples():
    x = np.array([[0.3, -1.2]])
    assert check_periodicity(np.eye(2), x, [2, 0]).passed
    assert check_periodicity(np.eye(2), x, [0, 0]).worst_violation == 0.0
    rng = make_rng(9)
    while True:
        w = standard_normal(rng, (3, 3))
        if np.linalg.cond(w) < 100:
            break
    rep = check_periodicity(w, standard_normal(rng, (20, 3)), [2, 4, -2],
                            PsfConfig(base=TrainConfig(n_features=3)))
    assert rep.passed and rep.worst_violation <= 1e-8


def test_odd_shift_is_only_a_diagnostic():
    rep = check_periodicity(np.eye(2), np.array([[0.3, 0.7], [-0.4, 1.1]]), [1, 0])
    assert rep.passed and rep.worst_violation > 1e-3 and math.isinf(rep.tolerance)


def test_periodicity_rejects_singular_weights():
    with pytest.raises(ValueError):
        check_periodicity(np.ones((2, 2)), np.zeros((1, 2)), [2, 0])


def _small_periodic():
    return gen_periodic(100, 100, seed=0)


def test_training_determinism_and_mask():
    b = _small_periodic()
    cfg = PsfConfig(base=TrainConfig(max_iters=30, seed=4))
    w1, m1, t1 = psf_train(b.train, b.target, cfg)
    w2, m2, _ = psf_train(b.train, b.target.x, cfg)
    np.testing.assert_array_equal(w1, w2)
    assert m1 == m2 == build_mask(2, 2)
    assert t1.iterations == 30


def test_early_stopping_window():
    b = _small_periodic()
    cfg = PsfConfig(base=TrainConfig(max_iters=500, early_stop=50, seed=1))
    _, _, trace = psf_train(b.train, b.target, cfg)
    assert len(trace.ks) <= 50
    assert trace.selected == int(np.argmin(trace.ks))


def test_training_rejects_unlabelled_rows():
    b = _small_periodic()
    with pytest.raises(ValueError):
        psf_train(b.train.unlabeled(), b.target)
    with pytest.raises(TypeError):
        psf_train(b.train.x, b.target)


def test_sine_feature_differs_from_soft_abs():
    rng = make_rng(3)
    w, x = standard_normal(rng, (2, 2)), standard_normal(rng, (5, 2))
    assert not np.allclose(psf_forward(w, x).z, sf_forward(w, x).z)
