import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftfilter._errors import InvariantError, NumericError, TrainingError
from driftfilter.data import gen_radial, make_rng, standard_normal
from driftfilter.metrics import mmd, mmd_percent_change, median_heuristic
from driftfilter.sf import (
    TrainConfig, init_weights, sf_forward, sf_objective_and_gradient, sf_train, soft_abs, transform,
)
from driftfilter.verify import gradient_check


def test_soft_abs_values():
    assert soft_abs(0.0, 1e-8) == pytest.approx(1e-4, rel=1e-12)
    assert soft_abs(3.0, 1e-8) == pytest.approx(3.0, rel=1e-8)
    assert soft_abs(-3.0) == soft_abs(3.0)
    with pytest.raises(ValueError):
        soft_abs(1.0, 0.0)


@given(st.floats(-1e6, 1e6), st.floats(1e-12, 1.0))
def test_soft_abs_properties(x, eps):
    v = soft_abs(x, eps)
    assert v >= np.sqrt(eps) * (1 - 1e-15)
    assert v == soft_abs(-x, eps)


def test_identity_example():
    c = sf_forward(np.eye(2), np.eye(2), 1e-16)
    np.testing.assert_allclose(c.z, np.eye(2), atol=1e-7)
    loss, _ = sf_objective_and_gradient(np.eye(2), np.eye(2), 1e-16)
    assert loss == pytest.approx(2.0, abs=1e-7)


def test_cache_shapes_and_norms():
    rng = make_rng(1)
    w, x = standard_normal(rng, (4, 3)), standard_normal(rng, (7, 3))
    c = sf_forward(w, x)
    assert c.h.shape == c.f.shape == c.f_tilde.shape == (4, 7)
    assert c.z.shape == (7, 4)
    np.testing.assert_allclose(np.linalg.norm(c.f_tilde, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(c.z, axis=1), 1.0, atol=1e-12)
    assert np.all(c.row_norms > 0) and np.all(c.col_norms > 0)


@st.composite
def instances(draw):
    l, m, n = draw(st.integers(1, 8)), draw(st.integers(1, 6)), draw(st.integers(1, 40))
    seed = draw(st.integers(0, 2**31))
    rng = make_rng(seed)
    return standard_normal(rng, (l, m)), standard_normal(rng, (n, m)) * draw(st.floats(1e-3, 1e3))


@given(instances())
def test_range_norm_and_loss_bounds(inst):
    w, x = inst
    c = sf_forward(w, x)
    assert np.all(c.z >= 0) and np.all(c.z <= 1 + 1e-12)
    np.testing.assert_allclose(np.linalg.norm(c.z, axis=1), 1.0, atol=1e-9)
    n, l = c.z.shape
    loss = c.z.sum()
    assert n - 1e-9 <= loss <= n * np.sqrt(l) + 1e-9


@given(instances(), st.floats(1e-3, 1e3))
def test_positive_scaling_invariance(inst, scale):
    w, x = inst
    # with eps > 0 the invariance is exact only up to eps/|h|^2 effects
    z1 = sf_forward(w, x, 1e-300).z
    z2 = sf_forward(w, scale * x, 1e-300).z
    np.testing.assert_allclose(z1, z2, atol=1e-12)


@given(instances())
def test_feature_moments_loose_bounds(inst):
    z = sf_forward(*inst).z
    assert np.all(z.mean(axis=0) > 0) and np.all(z.mean(axis=0) <= 1 + 1e-12)
    assert np.all(z.var(axis=0) >= 0) and np.all(z.var(axis=0) < 1)


def test_gradient_example():
    rep = gradient_check("sf", 3, 2, 5, seed=0, h=1e-6, tol=1e-4)
    assert rep.passed, rep.details


def test_gradient_matches_scipy_oracle():
    from scipy.optimize import approx_fprime

    rng = make_rng(4)
    w, x = standard_normal(rng, (3, 4)), standard_normal(rng, (9, 4))
    _, g = sf_objective_and_gradient(w, x)
    fd = approx_fprime(w.ravel(), lambda v: sf_objective_and_gradient(v.reshape(3, 4), x)[0], 1e-7)
    np.testing.assert_allclose(g.ravel(), fd, rtol=1e-4, atol=1e-5)


def test_transform_uses_batch_statistics():
    rng = make_rng(2)
    w, x = standard_normal(rng, (2, 2)), standard_normal(rng, (6, 2))
    np.testing.assert_array_equal(transform(w, x), sf_forward(w, x).z)
    single = transform(w, x[:1])
    c = sf_forward(w, x[:1])
    np.testing.assert_allclose(single[0], c.f_tilde[:, 0] / np.linalg.norm(c.f_tilde[:, 0]))
    assert not np.allclose(transform(w, x[:3]), transform(w, x)[:3])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        sf_forward(np.eye(2), np.zeros((3, 3)))


def test_non_finite_projection_names_stage():
    with pytest.raises(NumericError) as info:
        sf_forward(np.array([[1e308, 1e308]]), np.array([[1e308, 1e308]]))
    assert info.value.stage == "projection"


def test_zero_norm_is_internal_invariant():
    from driftfilter.sf import _normalise

    with pytest.raises(InvariantError):
        _normalise(np.zeros((2, 3)))


def test_init_weights_deterministic():
    np.testing.assert_array_equal(init_weights(3, 2, 5), init_weights(3, 2, 5))
    assert init_weights(3, 2, 5).shape == (3, 2)


def test_train_config_validation():
    for bad in ({"epsilon": 0}, {"step": -1}, {"max_iters": 0}, {"n_features": 0}, {"early_stop": 0}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_training_is_deterministic_and_descends():
    x = np.vstack([gen_radial(100, 100, seed=0).train.x, gen_radial(100, 100, seed=0).target.x])
    cfg = TrainConfig(max_iters=50, seed=3)
    w1, t1 = sf_train(x, cfg)
    w2, _ = sf_train(x, cfg)
    np.testing.assert_array_equal(w1, w2)
    assert t1.iterations == 50 and t1.final_loss < t1.loss[0]


def test_line_search_is_monotone():
    b = gen_radial(100, 100, seed=1)
    x = np.vstack([b.train.x, b.target.x])
    _, trace = sf_train(x, TrainConfig(max_iters=60, step=5.0, line_search=True, seed=1))
    assert np.all(np.diff(trace.loss) <= 1e-12)
    assert trace.final_loss <= trace.loss[-1]


def test_early_stopping_selects_ks_argmin():
    b = gen_radial(100, 100, seed=0)
    x = np.vstack([b.train.x, b.target.x])
    w, trace = sf_train(x, TrainConfig(max_iters=500, early_stop=50), n_train=100)
    assert len(trace.ks) == trace.iterations == 50
    assert trace.selected == int(np.argmin(trace.ks))
    with pytest.raises(ValueError):
        sf_train(x, TrainConfig(early_stop=10))


def test_divergence_reports_iteration():
    from driftfilter.sf import _gd

    def objective(w):
        loss = float("nan") if w[0, 0] > 2.5 else float(w[0, 0])
        return loss, -np.ones_like(w), None

    with pytest.raises(TrainingError) as info:
        _gd(np.zeros((1, 1)), objective, TrainConfig(max_iters=10, step=1.0))
    assert info.value.iteration == 3


def test_non_finite_gradient_step_is_training_error():
    b = gen_radial(20, 20, seed=0)
    x = np.vstack([b.train.x, b.target.x])
    with pytest.raises(TrainingError):
        sf_train(x, TrainConfig(max_iters=5, step=1e308, seed=0))


def test_radial_mmd_collapses():
    b = gen_radial(seed=0)
    w, _ = sf_train(np.vstack([b.train.x, b.target.x]), TrainConfig(max_iters=500, seed=0))
    sigma, _ = median_heuristic(b.train.x, b.test.x)
    before = mmd(b.train.x, b.test.x, sigma)
    after = mmd(transform(w, b.train.x), transform(w, b.test.x), sigma)
    assert mmd_percent_change(before, after) <= -80
