"""Transmission-rate selection against an outage constraint.

Working in the dB domain, the rate that is exceeded by the true capacity with
probability 1 - p_out under a Gaussian posterior N(mean, std^2) follows from
the Gaussian quantile:

    gamma = mean - n0 + sqrt(2) * (std + sigma_delta) * erfinv(2 p_out - 1)
    rate  = log2(1 + 10^(gamma / 10))

sigma_delta is an extra uncertainty margin added to the posterior std; for
p_out < 0.5 the selected rate decreases monotonically in it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _erf

from .channel import ChannelParams, path_loss_mean
from .gp import FittedModel, predict

_LN2 = math.log(2.0)
_SQRT2 = math.sqrt(2.0)
_HALF_SQRT_PI = 0.5 * math.sqrt(math.pi)

# Rational approximation of the standard normal quantile (Acklam's
# coefficients); accurate to ~1.2e-9 relative before polishing.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
# Branch point: the tail expansion takes over where the central one degrades.
_TAIL = 1.0 - 2.0 * 0.02425


@dataclass(frozen=True)
class RateConfig:
    """Outage target and uncertainty margin for rate selection.

    p_out       maximum tolerated outage probability, in (0, 1)
    sigma_delta additional uncertainty margin, dB
    """

    p_out: float
    sigma_delta: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.p_out < 1.0):
            raise ValueError(f"p_out must be in (0, 1), got {self.p_out}")
        if not (self.sigma_delta >= 0 and math.isfinite(self.sigma_delta)):
            raise ValueError(
                f"sigma_delta must be non-negative, got {self.sigma_delta}")


@dataclass(frozen=True)
class RateDecision:
    """Selected operating point: outage SNR in dB and rate in bit/s/Hz."""

    gamma_db: float
    rate: float


def erfinv(u):
    """Inverse error function on (-1, 1), vectorized.

    A rational normal-quantile approximation supplies the starting point and
    one Newton step against scipy's erf polishes it; round-trip error in u is
    below 1e-9 across the domain. Odd symmetry is exact by construction.
    """
    arr = np.asarray(u, dtype=np.float64)
    if np.any(~(np.abs(arr) < 1.0)):
        raise ValueError("erfinv is defined on (-1, 1) only")
    flat = arr.reshape(-1)
    sign = np.sign(flat)
    v = np.abs(flat)

    x = np.empty_like(v)
    central = v <= _TAIL
    # central branch in q = p - 1/2 = v/2
    q = v[central] / 2.0
    r = q * q
    num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    x[central] = num * q / den
    # tail branch in s = sqrt(-2 ln(1 - p)); 1 - p = (1 - v)/2 is exact here
    t = v[~central]
    s = np.sqrt(-2.0 * np.log((1.0 - t) / 2.0))
    num = ((((_C[0] * s + _C[1]) * s + _C[2]) * s + _C[3]) * s + _C[4]) * s + _C[5]
    den = (((_D[0] * s + _D[1]) * s + _D[2]) * s + _D[3]) * s + 1.0
    x[~central] = -num / den

    z = x / _SQRT2
    # One Newton polish where erf still resolves; past z = 6 the difference
    # erf(z) - v is rounding noise scaled by exp(z^2) and the start is kept.
    safe = z < 6.0
    zs = z[safe]
    z[safe] = zs - (_erf(zs) - v[safe]) * _HALF_SQRT_PI * np.exp(zs * zs)
    out = (sign * z).reshape(arr.shape)
    return out if out.ndim else float(out)


def outage_snr(mean_dbm, std_db, n0_dbm: float, cfg: RateConfig):
    """SNR in dB whose exceedance probability under the posterior is 1 - p_out."""
    quantile = erfinv(2.0 * cfg.p_out - 1.0)
    mean = np.asarray(mean_dbm, dtype=np.float64)
    std = np.asarray(std_db, dtype=np.float64)
    out = mean - n0_dbm + _SQRT2 * (std + cfg.sigma_delta) * quantile
    return out if out.ndim else float(out)


def rate_from_snr(gamma_db):
    """Rate in bit/s/Hz at SNR gamma_db."""
    g = np.asarray(gamma_db, dtype=np.float64)
    out = np.log1p(np.power(10.0, g / 10.0)) / _LN2
    return out if out.ndim else float(out)


def snr_from_rate(rate):
    """Inverse of rate_from_snr for rate > 0."""
    r = np.asarray(rate, dtype=np.float64)
    if np.any(r <= 0.0):
        raise ValueError("snr_from_rate requires rate > 0")
    out = 10.0 * np.log10(np.expm1(r * _LN2))
    return out if out.ndim else float(out)


def select_rate(model: FittedModel, x_star, n0: float,
                cfg: RateConfig) -> RateDecision:
    """Rate decision at x_star from a fitted model's posterior."""
    post = predict(model, x_star)
    gamma = outage_snr(post.mean, post.std, n0, cfg)
    return RateDecision(gamma_db=float(gamma), rate=float(rate_from_snr(gamma)))


def pathloss_rate(channel: ChannelParams, x_star,
                  cfg: RateConfig) -> RateDecision:
    """Baseline decision ignoring sensing data: path-loss mean, prior std."""
    mean = float(np.asarray(path_loss_mean(channel, x_star)))
    gamma = outage_snr(mean, channel.sigma_db, channel.n0, cfg)
    return RateDecision(gamma_db=float(gamma), rate=float(rate_from_snr(gamma)))
