import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gosf.model import (
    Dataset,
    InputError,
    LossModel,
    baseline_value,
    lad_subgradient_signs,
    loss_gradient,
    loss_value,
    make_dataset,
    overflow_clamps,
    standardize,
)

from conftest import null_data


def test_logistic_baseline_is_n_log2():
    data = null_data("logistic", 246, 5, 0)
    model = LossModel("logistic")
    assert baseline_value(model, data) == pytest.approx(246 * np.log(2))
    assert baseline_value(model, data) == pytest.approx(170.51, abs=0.01)
    assert loss_value(model, data, np.zeros(5)) == pytest.approx(246 * np.log(2))


def test_lad_baseline_is_l1_norm():
    data = null_data("lad", 20, 3, 1)
    model = LossModel("lad")
    assert loss_value(model, data, np.zeros(3)) == pytest.approx(np.abs(data.y).sum())
    assert baseline_value(model, data) == pytest.approx(np.abs(data.y).sum())


def test_poisson_baseline():
    X = np.random.default_rng(0).standard_normal((5, 2))
    data = Dataset(X, np.array([0.0, 3, 1, 7, 2]))
    assert loss_value(LossModel("poisson"), data, np.zeros(2)) == pytest.approx(5.0)
    assert baseline_value(LossModel("poisson"), null_data("poisson", 10, 2, 0)) == 10.0


def test_gaussian_baseline_zero_response():
    data = Dataset(np.ones((4, 2)), np.zeros(4))
    assert baseline_value(LossModel("gaussian"), data) == 0.0


def test_gradient_at_zero_closed_forms():
    data = null_data("logistic", 30, 4, 3)
    g = loss_gradient(LossModel("logistic"), data, np.zeros(4))
    np.testing.assert_allclose(g, data.X.T @ (0.5 - data.y))
    dg = null_data("gaussian", 30, 4, 3)
    np.testing.assert_allclose(loss_gradient(LossModel("gaussian"), dg, np.zeros(4)), -dg.X.T @ dg.y)


@pytest.mark.parametrize("family", ["gaussian", "logistic", "poisson"])
def test_gradient_matches_finite_differences(family):
    model = LossModel(family)
    h = 1e-6
    for seed in range(20):
        data = null_data(family, 30, 8, seed)
        beta = np.random.default_rng(100 + seed).normal(scale=0.3, size=8)
        g = loss_gradient(model, data, beta)
        fd = np.empty(8)
        for j in range(8):
            e = np.zeros(8)
            e[j] = h
            fd[j] = (loss_value(model, data, beta + e) - loss_value(model, data, beta - e)) / (2 * h)
        np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-5)


def test_lad_gradient_independent_of_rng_when_residuals_nonzero():
    data = null_data("lad", 30, 5, 0)
    beta = np.full(5, 0.1)
    g1 = loss_gradient(LossModel("lad"), data, beta, np.random.default_rng(1))
    g2 = loss_gradient(LossModel("lad"), data, beta, np.random.default_rng(2))
    np.testing.assert_array_equal(g1, g2)
    np.testing.assert_allclose(g1, -data.X.T @ np.sign(data.y - data.X @ beta))


def test_lad_subgradient_zero_residuals_uniform():
    r = np.array([1.0, 0.0, -2.0, 0.0])
    s = lad_subgradient_signs(r, np.random.default_rng(0))
    assert s[0] == 1 and s[2] == -1
    assert np.all(np.abs(s[[1, 3]]) <= 1)
    with pytest.raises(InputError):
        lad_subgradient_signs(r, None)


def test_gaussian_form_differs_from_glm_form_by_constant():
    data = null_data("gaussian", 25, 4, 7)
    model = LossModel("gaussian")
    for seed in range(5):
        beta = np.random.default_rng(seed).standard_normal(4)
        eta = data.X @ beta
        glm_form = np.sum(0.5 * eta ** 2) - data.y @ eta
        assert loss_value(model, data, beta) - glm_form == pytest.approx(0.5 * data.y @ data.y)


@pytest.mark.parametrize("family", ["gaussian", "logistic", "poisson", "lad"])
def test_convexity_spot_check(family):
    model = LossModel(family)
    data = null_data(family, 30, 6, 11)
    rng = np.random.default_rng(5)
    for _ in range(20):
        b1, b2 = rng.standard_normal(6), rng.standard_normal(6)
        mid = loss_value(model, data, 0.5 * (b1 + b2))
        assert mid <= 0.5 * (loss_value(model, data, b1) + loss_value(model, data, b2)) + 1e-9


def test_standardize_unit_second_moment():
    X = np.random.default_rng(0).normal(3.0, 2.0, size=(40, 6))
    Xs, scale = standardize(X)
    np.testing.assert_allclose(np.mean(Xs ** 2, axis=0), 1.0, atol=1e-10)
    np.testing.assert_allclose(Xs * scale, X)
    with pytest.raises(InputError):
        standardize(np.zeros((3, 2)))


def test_input_validation():
    with pytest.raises(InputError):
        LossModel("probit")
    with pytest.raises(InputError):
        Dataset(np.ones((3, 2)), np.ones(4))
    with pytest.raises(InputError):
        Dataset(np.array([[1.0, np.nan]]), np.ones(1))
    with pytest.raises(InputError):
        make_dataset(np.eye(3), [0, 1, 2], "logistic")
    with pytest.raises(InputError):
        make_dataset(np.eye(3), [0, 1.5, 2], "poisson")
    with pytest.raises(InputError):
        loss_value(LossModel("gaussian"), null_data("gaussian", 5, 2, 0), np.zeros(3))


def test_poisson_overflow_is_clamped_and_counted():
    overflow_clamps.reset()
    data = Dataset(np.array([[1.0], [2.0]]), np.array([1.0, 0.0]))
    v = loss_value(LossModel("poisson"), data, np.array([1000.0]))
    assert np.isfinite(v)
    assert overflow_clamps.count >= 2


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["gaussian", "logistic", "poisson"]))
def test_glm_curvature_nonnegative(seed, family):
    u = np.random.default_rng(seed).normal(scale=20, size=50)
    assert np.all(LossModel(family).b_double_prime(u) >= 0)
