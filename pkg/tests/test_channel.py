"""Ground-truth channel: path loss, shadowing covariance, field sampling."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ratemap.channel import (ChannelParams, NumericalError,
                             _cholesky_with_jitter, capacity, path_loss_mean,
                             received_power, sample_shadow_field, shadow_cov,
                             shadow_cov_matrix, tx_distance)

# High-precision references, evaluated at the exact double-precision inputs.
DIST_120_80 = 147.648230602334005755
PLOSS_120_80 = -55.0768474040690724562
COV_AT_30 = 23.7511423939120966687
CAPACITY_M50 = 41.1919083766038674608


def test_tx_distance_matches_reference(channel):
    got = tx_distance(channel, (120.0, 80.0))
    assert got == pytest.approx(DIST_120_80, rel=1e-14)


def test_path_loss_mean_matches_reference(channel):
    got = path_loss_mean(channel, (120.0, 80.0))
    assert got == pytest.approx(PLOSS_120_80, rel=1e-14)


def test_path_loss_mean_vectorizes(channel):
    pts = np.array([[120.0, 80.0], [0.0, 150.0]])
    got = path_loss_mean(channel, pts)
    assert got.shape == (2,)
    assert got[0] == pytest.approx(PLOSS_120_80, rel=1e-14)
    # (0, 150) sits exactly 10 m from the transmitter: 10 - 30*log10(10).
    assert got[1] == pytest.approx(-20.0, abs=1e-12)


def test_path_loss_mean_rejects_transmitter_location(channel):
    with pytest.raises(ValueError):
        path_loss_mean(channel, channel.x_tx)


def test_shadow_cov_at_zero_is_full_variance(channel):
    assert shadow_cov(channel, 0.0) == pytest.approx(36.0, rel=1e-15)


def test_shadow_cov_halves_at_decorrelation_distance(channel):
    assert shadow_cov(channel, channel.d_cor) == pytest.approx(18.0, rel=1e-14)


def test_shadow_cov_matches_reference(channel):
    assert shadow_cov(channel, 30.0) == pytest.approx(COV_AT_30, rel=1e-14)


def test_cov_matrix_matches_pairwise_values(channel):
    rng = np.random.default_rng(1)
    pts = rng.uniform(0.0, 300.0, (7, 2))
    mat = shadow_cov_matrix(channel, pts)
    assert mat.shape == (7, 7)
    assert np.allclose(mat, mat.T, rtol=0.0, atol=0.0)
    for i in range(7):
        for j in range(7):
            d = float(np.hypot(*(pts[i] - pts[j])))
            assert mat[i, j] == pytest.approx(shadow_cov(channel, d), rel=1e-12)


def test_shadow_field_matches_cholesky_oracle(channel):
    rng = np.random.default_rng(7)
    pts = np.random.default_rng(8).uniform(0.0, 300.0, (12, 2))
    field = sample_shadow_field(channel, pts, rng)

    cov = shadow_cov_matrix(channel, pts)
    cov[np.diag_indices(12)] += 1e-9 * channel.sigma_db ** 2
    oracle = np.linalg.cholesky(cov) @ np.random.default_rng(7).standard_normal(12)
    assert np.array_equal(field, oracle)


def test_shadow_field_consumes_one_draw_per_point(channel):
    pts = np.random.default_rng(8).uniform(0.0, 300.0, (5, 2))
    rng = np.random.default_rng(3)
    sample_shadow_field(channel, pts, rng)
    after = rng.uniform()

    probe = np.random.default_rng(3)
    probe.standard_normal(5)
    assert after == probe.uniform()


def test_coincident_points_share_shadow_value(channel):
    pts = np.array([[50.0, 60.0], [50.0, 60.0], [200.0, 10.0]])
    field = sample_shadow_field(channel, pts, np.random.default_rng(11))
    # Equal up to the stabilizing jitter of the factorization.
    assert abs(field[0] - field[1]) < 5e-3


def test_cholesky_jitter_exhaustion_raises():
    with pytest.raises(NumericalError):
        _cholesky_with_jitter(np.array([[-1.0]]), 1e-9)


def test_received_power_adds_shadow(channel):
    pts = np.array([[120.0, 80.0], [30.0, 30.0]])
    shadow = np.array([1.5, -2.0])
    got = received_power(channel, pts, shadow)
    assert np.allclose(got, path_loss_mean(channel, pts) + shadow, rtol=1e-15)


def test_capacity_matches_reference():
    assert capacity(-50.0, -174.0) == pytest.approx(CAPACITY_M50, rel=1e-14)


def test_capacity_is_one_at_noise_floor():
    # snr = 1 exactly, so log2(1 + snr) = 1.
    assert capacity(-174.0, -174.0) == pytest.approx(1.0, rel=1e-15)


def test_capacity_monotone_in_power():
    p = np.linspace(-120.0, -20.0, 40)
    c = capacity(p, -174.0)
    assert np.all(np.diff(c) > 0)


@pytest.mark.parametrize("kwargs", [
    {"eta": 0.0},
    {"eta": math.inf},
    {"sigma_db": -1.0},
    {"d_cor": 0.0},
    {"x_tx": (math.nan, 0.0)},
    {"x_tx": (1.0, 2.0, 3.0)},
    {"p_tx": math.inf},
])
def test_channel_params_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelParams(**kwargs)
