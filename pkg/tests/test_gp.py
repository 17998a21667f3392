"""Regression fits: closed forms, correction diagonals, flavor ordering."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ratemap import selftest
from ratemap.channel import NumericalError, path_loss_mean
from ratemap.gp import (NoiseParams, SensingDataset, curvature_mean_shift,
                        first_order_noise_diag, fit_nigp1, fit_nigp2, fit_pure,
                        predict, predict_many, second_order_noise_diag)
from ratemap.kernels import kernel, kernel_diag_value, kernel_matrix
from tests.conftest import make_scene

# Prior predictive standard deviation far away from every observation.
PRIOR_STD = 5.99995841131330197443


def test_single_sensor_closed_form(channel, hyper):
    loc = np.array([[50.0, 50.0]])
    obs = np.array([-40.0])
    noise = NoiseParams(sigma_y=3.0)
    model = fit_pure(SensingDataset(loc, obs), channel, hyper, noise)

    resid = obs[0] - float(path_loss_mean(channel, loc[0]))
    alpha = resid / (kernel_diag_value(hyper) + 9.0)
    assert model.alpha == pytest.approx([alpha], rel=1e-12)

    x_star = np.array([80.0, 65.0])
    post = predict(model, x_star)
    k_star = kernel(hyper, x_star, loc[0])
    want_mean = float(path_loss_mean(channel, x_star)) + k_star * alpha
    want_var = kernel_diag_value(hyper) - k_star ** 2 / (kernel_diag_value(hyper) + 9.0)
    assert post.mean == pytest.approx(want_mean, rel=1e-12)
    assert post.std == pytest.approx(math.sqrt(want_var), rel=1e-12)


def test_fit_matches_dense_solve(channel, hyper):
    dataset, noise = make_scene(channel, seed=5, n=6, sigma_y=2.0)
    model = fit_pure(dataset, channel, hyper, noise)

    cov = kernel_matrix(hyper, dataset.locations)
    cov[np.diag_indices(6)] += noise.sigma_y ** 2
    resid = dataset.observations - path_loss_mean(channel, dataset.locations)
    alpha = np.linalg.solve(cov, resid)
    assert np.allclose(model.alpha, alpha, rtol=1e-9, atol=1e-12)

    pts = np.array([[10.0, 10.0], [150.0, 150.0], [290.0, 20.0]])
    mean, std = predict_many(model, pts)
    cross = kernel_matrix(hyper, pts, dataset.locations)
    want_mean = path_loss_mean(channel, pts) + cross @ alpha
    want_var = kernel_diag_value(hyper) - np.einsum(
        "ij,jk,ik->i", cross, np.linalg.inv(cov), cross)
    assert np.allclose(mean, want_mean, rtol=1e-10)
    assert np.allclose(std, np.sqrt(want_var), rtol=1e-8)


def test_interpolation_with_tiny_observation_noise(channel, hyper):
    dataset, _ = make_scene(channel, seed=6, n=8, sigma_y=0.0)
    noise = NoiseParams(sigma_y=1e-6)
    model = fit_pure(dataset, channel, hyper, noise)
    mean, std = predict_many(model, dataset.locations)
    assert np.allclose(mean, dataset.observations, atol=1e-2)
    assert np.all(std < 0.1)


def test_far_prediction_reverts_to_prior(channel, hyper):
    dataset, noise = make_scene(channel, seed=7, n=8)
    model = fit_pure(dataset, channel, hyper, noise)
    x_star = np.array([50_000.0, 50_000.0])
    post = predict(model, x_star)
    assert post.mean == pytest.approx(float(path_loss_mean(channel, x_star)),
                                      abs=1e-8)
    assert post.std == pytest.approx(PRIOR_STD, rel=1e-10)


def test_zero_location_noise_collapses_all_flavors():
    assert selftest.sigma_zero_collapse()


def test_first_order_diagonal_matches_gradient_oracle(channel, hyper):
    dataset, noise = make_scene(channel, seed=8, n=10, sigma_x=5.0)
    model = fit_pure(dataset, channel, hyper, noise)
    diag = first_order_noise_diag(model)

    def mean_surface(p):
        return float(predict_many(model, p[None, :])[0][0])

    for j in range(len(dataset)):
        g = selftest.fd_grad(mean_surface, dataset.locations[j], 1e-3)
        want = noise.sigma_x ** 2 * float(g @ g)
        assert diag[j] == pytest.approx(want, rel=1e-4, abs=1e-10)


def _smoothed_kernel_sum(model, p):
    """Kernel part of the posterior mean with the curvature-floor radius."""
    hyper = model.hyper
    d2 = ((model.dataset.locations - p) ** 2).sum(axis=1)
    r = np.sqrt(d2 + hyper.d_c_hess ** 2)
    return float(np.dot(model.alpha,
                        hyper.sigma_k ** 2 * np.exp(-r / hyper.ell)))


def test_second_order_diagonal_matches_hessian_oracle(channel, hyper):
    dataset, noise = make_scene(channel, seed=9, n=10, sigma_x=5.0)
    model = fit_pure(dataset, channel, hyper, noise)
    diag = second_order_noise_diag(model)

    for j in range(len(dataset)):
        h = selftest.fd_hess(lambda p: _smoothed_kernel_sum(model, p),
                             dataset.locations[j], 1e-2)
        want = 0.5 * noise.sigma_x ** 4 * (
            h[0, 0] ** 2 + 2.0 * h[0, 1] ** 2 + h[1, 1] ** 2)
        assert diag[j] == pytest.approx(want, rel=1e-3, abs=1e-12)


def test_curvature_shift_matches_hessian_trace_oracle(channel, hyper):
    dataset, noise = make_scene(channel, seed=10, n=10, sigma_x=5.0)
    model = fit_pure(dataset, channel, hyper, noise)
    shift = curvature_mean_shift(model)

    for j in range(len(dataset)):
        h = selftest.fd_hess(lambda p: _smoothed_kernel_sum(model, p),
                             dataset.locations[j], 1e-2)
        want = 0.5 * noise.sigma_x ** 2 * (h[0, 0] + h[1, 1])
        assert shift[j] == pytest.approx(want, rel=1e-3, abs=1e-12)


def test_first_order_fit_carries_gradient_diagonal(channel, hyper):
    dataset, noise = make_scene(channel, seed=11, n=10, sigma_x=6.0)
    pure = fit_pure(dataset, channel, hyper, noise)
    nigp1 = fit_nigp1(dataset, channel, hyper, noise)
    want = noise.sigma_y ** 2 + first_order_noise_diag(pure)
    assert np.allclose(nigp1.noise_diag, want, rtol=1e-12)


def test_second_order_fit_adds_nonnegative_term(channel, hyper):
    dataset, noise = make_scene(channel, seed=12, n=10, sigma_x=6.0)
    nigp1 = fit_nigp1(dataset, channel, hyper, noise)
    nigp2 = fit_nigp2(dataset, channel, hyper, noise)
    assert np.all(nigp2.noise_diag >= nigp1.noise_diag - 1e-15)


def test_predictive_variance_ordering_across_flavors():
    assert selftest.variance_ordering_violations(20) == 0


def test_mean_shift_changes_residual_not_diagonal(channel, hyper):
    dataset, noise = make_scene(channel, seed=13, n=10, sigma_x=6.0)
    plain = fit_nigp2(dataset, channel, hyper, noise, mean_shift=False)
    shifted = fit_nigp2(dataset, channel, hyper, noise, mean_shift=True)
    assert np.array_equal(plain.noise_diag, shifted.noise_diag)
    assert not np.array_equal(plain.alpha, shifted.alpha)


def test_iterating_the_correction_changes_the_fit(channel, hyper):
    dataset, noise = make_scene(channel, seed=14, n=10, sigma_x=6.0)
    once = fit_nigp1(dataset, channel, hyper, noise, iterations=1)
    twice = fit_nigp1(dataset, channel, hyper, noise, iterations=2)
    assert not np.array_equal(once.alpha, twice.alpha)


def test_reusing_the_first_pass_is_equivalent(channel, hyper):
    dataset, noise = make_scene(channel, seed=15, n=10, sigma_x=6.0)
    pure = fit_pure(dataset, channel, hyper, noise)
    direct = fit_nigp2(dataset, channel, hyper, noise)
    reused = fit_nigp2(dataset, channel, hyper, noise, pure_fit=pure)
    assert np.array_equal(direct.alpha, reused.alpha)
    assert np.array_equal(direct.noise_diag, reused.noise_diag)


def test_factorization_failure_raises_numerical_error(channel, hyper,
                                                      monkeypatch):
    dataset, noise = make_scene(channel, seed=16, n=5)

    def always_fail(_):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(np.linalg, "cholesky", always_fail)
    with pytest.raises(NumericalError):
        fit_pure(dataset, channel, hyper, noise)


def test_dataset_validation():
    with pytest.raises(ValueError):
        SensingDataset(np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        SensingDataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        SensingDataset(np.full((2, 2), np.nan), np.zeros(2))
    with pytest.raises(ValueError):
        SensingDataset(np.zeros((2, 2)), np.array([0.0, np.inf]))


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(sigma_x=-1.0)
    with pytest.raises(ValueError):
        NoiseParams(sigma_y=math.nan)
