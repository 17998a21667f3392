"""Rate selection: inverse error function and the dB-domain quantile chain."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import erf

from ratemap.channel import capacity, path_loss_mean
from ratemap.gp import NoiseParams, SensingDataset, fit_pure
from ratemap.rates import (RateConfig, erfinv, outage_snr, pathloss_rate,
                           rate_from_snr, select_rate, snr_from_rate)

# erfinv references at the exact double arguments, 21 significant digits.
ERFINV_REFERENCE = [
    (0.25, 0.225312055012178104725),
    (0.5, 0.476936276204469873381),
    (0.75, 0.81341984759761854169),
    (0.9, 1.16308715367667416284),
    (0.95, 1.38590382434967767663),
    (0.99, 1.82138636771844945587),
    (0.998, 2.18512421913300407918),
    (0.999, 2.32675376551352449387),
    (0.9999, 2.75106390571207969174),
]

# Quantile chain at mean=-50 dBm, std=3 dB, p_out=1e-3, n0=-174 dBm.
GAMMA_NO_MARGIN = 114.729303081496560167
RATE_NO_MARGIN = 38.1122495213319214683
GAMMA_HALF_MARGIN = 113.184186928412653528
RATE_HALF_MARGIN = 37.5989730454546250042


@pytest.mark.parametrize("u,want", ERFINV_REFERENCE)
def test_erfinv_matches_reference_values(u, want):
    assert erfinv(u) == pytest.approx(want, rel=1e-13)


def test_erfinv_odd_symmetry_is_exact():
    u = np.linspace(1e-6, 1.0 - 1e-9, 257)
    assert np.array_equal(erfinv(-u), -erfinv(u))


def test_erfinv_of_zero_is_zero():
    assert erfinv(0.0) == 0.0


def test_erfinv_round_trip():
    u = np.linspace(-(1.0 - 1e-12), 1.0 - 1e-12, 2001)
    assert np.max(np.abs(erf(erfinv(u)) - u)) <= 1e-9


@pytest.mark.parametrize("bad", [1.0, -1.0, 1.5, float("nan")])
def test_erfinv_rejects_out_of_domain(bad):
    with pytest.raises(ValueError):
        erfinv(bad)


def test_erfinv_preserves_shape():
    assert isinstance(erfinv(0.3), float)
    assert erfinv(np.full(3, 0.3)).shape == (3,)
    assert erfinv(np.full((2, 2), 0.3)).shape == (2, 2)
    assert erfinv([0.1, 0.2]).shape == (2,)


def test_erfinv_monotone_including_tail():
    u = np.concatenate([np.linspace(-0.999999, 0.999999, 501),
                        1.0 - np.logspace(-12, -7, 20)])
    u = np.sort(u)
    assert np.all(np.diff(erfinv(u)) > 0)


def test_outage_snr_matches_reference():
    cfg = RateConfig(p_out=1e-3)
    got = outage_snr(-50.0, 3.0, -174.0, cfg)
    assert got == pytest.approx(GAMMA_NO_MARGIN, abs=1e-9)


def test_rate_chain_matches_reference():
    assert rate_from_snr(GAMMA_NO_MARGIN) == pytest.approx(RATE_NO_MARGIN,
                                                           abs=1e-9)
    cfg = RateConfig(p_out=1e-3, sigma_delta=0.5)
    gamma = outage_snr(-50.0, 3.0, -174.0, cfg)
    assert gamma == pytest.approx(GAMMA_HALF_MARGIN, abs=1e-9)
    assert rate_from_snr(gamma) == pytest.approx(RATE_HALF_MARGIN, abs=1e-9)


def test_snr_rate_round_trip():
    g = np.linspace(-30.0, 120.0, 61)
    assert np.allclose(snr_from_rate(rate_from_snr(g)), g, rtol=1e-12,
                       atol=1e-9)
    with pytest.raises(ValueError):
        snr_from_rate(0.0)


def test_margin_reduces_selected_rate():
    rates = [rate_from_snr(outage_snr(-60.0, 4.0, -174.0,
                                      RateConfig(p_out=1e-3, sigma_delta=sd)))
             for sd in (0.0, 0.3, 0.9, 2.0)]
    assert all(a > b for a, b in zip(rates, rates[1:]))


def test_select_rate_uses_the_posterior(channel, hyper):
    dataset = SensingDataset(np.array([[50.0, 50.0]]), np.array([-40.0]))
    model = fit_pure(dataset, channel, hyper, NoiseParams(sigma_y=3.0))
    cfg = RateConfig(p_out=1e-3)
    decision = select_rate(model, (80.0, 65.0), channel.n0, cfg)
    from ratemap.gp import predict
    post = predict(model, (80.0, 65.0))
    assert decision.gamma_db == pytest.approx(
        outage_snr(post.mean, post.std, channel.n0, cfg), rel=1e-15)
    assert decision.rate == pytest.approx(
        rate_from_snr(decision.gamma_db), rel=1e-15)


def test_pathloss_decision_uses_prior_spread(channel):
    cfg = RateConfig(p_out=1e-3, sigma_delta=0.2)
    decision = pathloss_rate(channel, (120.0, 80.0), cfg)
    mean = float(path_loss_mean(channel, (120.0, 80.0)))
    want = outage_snr(mean, channel.sigma_db, channel.n0, cfg)
    assert decision.gamma_db == pytest.approx(want, rel=1e-15)


def test_selected_rate_is_calibrated_under_gaussian_power():
    # Exceedance of the chosen rate by true capacity should hit 1 - p_out.
    mean, std, p_out, n0 = -60.0, 4.0, 0.05, -174.0
    gamma = outage_snr(mean, std, n0, RateConfig(p_out=p_out))
    rate = rate_from_snr(gamma)
    draws = np.random.default_rng(77).normal(mean, std, 200_000)
    phat = float(np.mean(capacity(draws, n0) < rate))
    se = np.sqrt(p_out * (1.0 - p_out) / len(draws))
    assert abs(phat - p_out) <= 3.0 * se


@pytest.mark.parametrize("kwargs", [
    {"p_out": 0.0},
    {"p_out": 1.0},
    {"p_out": -0.1},
    {"p_out": 1e-3, "sigma_delta": -0.5},
])
def test_rate_config_validation(kwargs):
    with pytest.raises(ValueError):
        RateConfig(**kwargs)
