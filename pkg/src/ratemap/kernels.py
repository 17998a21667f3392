"""Covariance kernel of the power map and its exact spatial calculus.

The kernel between sensing locations xi, xj is exponential in a smoothed
separation,

    k(xi, xj) = sigma_k^2 * exp(-r / ell),    r = sqrt(d(xi,xj)^2 + d_c^2),

with d_c a small smoothing radius. Folding d_c into the radius this way keeps
k twice differentiable everywhere, including coincident points, and the
gradient and Hessian below are its exact derivatives:

    dk/dx_m     = -sigma_k^2 * exp(-r/ell) * (x_m - xi_m) / (ell * r)
    d2k/dx_mdx_n = sigma_k^2 * exp(-r/ell) * (-delta_mn / (ell*r)
                   + (x_m - xi_m)(x_n - xi_n)/r^2 * (1/ell^2 + 1/(ell*r)))

Matching the shadowing covariance exp(-d*ln2/d_cor) requires ell = d_cor/ln2
and sigma_k = sigma_db, which `KernelHyper.from_channel` sets up.

The posterior mean of a fitted model is p_bar(x) + sum_i alpha_i k(x, x_i).
Its second derivative is dominated near sensing locations by the kernel term
whose curvature grows like 1/(ell*r); `posterior_mean_hess` therefore accepts
a separate smoothing radius, and the second-order input-noise correction
evaluates curvature with the larger `d_c_hess` floor (see gp.fit_nigp2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .channel import ChannelParams

_LN2 = math.log(2.0)
_LN10 = math.log(10.0)

# Curvature floor for the second-order input-noise correction, meters.
# Calibrated against the reference outage/margin behavior; see README.
DEFAULT_D_C_HESS = 5.0


@dataclass(frozen=True)
class KernelHyper:
    """Kernel hyperparameters, treated as known rather than learned.

    sigma_k  signal standard deviation, dB
    ell      length scale, meters
    d_c      smoothing radius keeping the kernel differentiable, meters
    d_c_hess smoothing radius used when posterior-mean curvature is queried
             at the sensing locations themselves (second-order correction)
    """

    sigma_k: float
    ell: float
    d_c: float = 1e-3
    d_c_hess: float = DEFAULT_D_C_HESS

    def __post_init__(self) -> None:
        if not (self.sigma_k > 0 and math.isfinite(self.sigma_k)):
            raise ValueError(f"sigma_k must be positive, got {self.sigma_k}")
        if not (self.ell > 0 and math.isfinite(self.ell)):
            raise ValueError(f"ell must be positive, got {self.ell}")
        if not (self.d_c > 0 and math.isfinite(self.d_c)):
            raise ValueError(f"d_c must be positive, got {self.d_c}")
        if not (self.d_c_hess > 0 and math.isfinite(self.d_c_hess)):
            raise ValueError(f"d_c_hess must be positive, got {self.d_c_hess}")

    @classmethod
    def from_channel(cls, ch: ChannelParams, d_c: float = 1e-3,
                     d_c_hess: float = DEFAULT_D_C_HESS) -> "KernelHyper":
        """Hyperparameters matched to the generating shadowing covariance."""
        return cls(sigma_k=ch.sigma_db, ell=ch.d_cor / _LN2,
                   d_c=d_c, d_c_hess=d_c_hess)


def _rows(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64)).reshape(-1, 2)


def kernel(hyper: KernelHyper, xi, xj) -> float:
    """Kernel value between two points."""
    a = np.asarray(xi, dtype=np.float64)
    b = np.asarray(xj, dtype=np.float64)
    d2 = float(((a - b) ** 2).sum())
    r = math.sqrt(d2 + hyper.d_c ** 2)
    return hyper.sigma_k ** 2 * math.exp(-r / hyper.ell)


def kernel_diag_value(hyper: KernelHyper) -> float:
    """k(x, x), the prior variance seen by the regression."""
    return hyper.sigma_k ** 2 * math.exp(-hyper.d_c / hyper.ell)


def kernel_matrix(hyper: KernelHyper, a, b=None) -> np.ndarray:
    """Kernel matrix between row sets a and b (b defaults to a)."""
    a = _rows(a)
    b = a if b is None else _rows(b)
    return backend.active().cov_matrix(
        a, b, hyper.sigma_k ** 2, hyper.ell, hyper.d_c)


def kernel_grad(hyper: KernelHyper, x, xi) -> np.ndarray:
    """Gradient of kernel(., xi) at x; zero at x = xi."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(xi, dtype=np.float64)
    delta = a - b
    r = math.sqrt(float((delta * delta).sum()) + hyper.d_c ** 2)
    coeff = -hyper.sigma_k ** 2 * math.exp(-r / hyper.ell) / (hyper.ell * r)
    return coeff * delta


def kernel_hess(hyper: KernelHyper, x, xi, smoothing: float | None = None) -> np.ndarray:
    """Hessian of kernel(., xi) at x as a (2, 2) array.

    `smoothing` overrides the radius in the formula (defaults to hyper.d_c);
    the second-order correction passes hyper.d_c_hess here to cap the
    curvature spike at coincident points.
    """
    floor = hyper.d_c if smoothing is None else smoothing
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(xi, dtype=np.float64)
    delta = a - b
    r2 = float((delta * delta).sum()) + floor ** 2
    r = math.sqrt(r2)
    e = hyper.sigma_k ** 2 * math.exp(-r / hyper.ell)
    iso = e / (hyper.ell * r)
    dyad = e * (1.0 / hyper.ell ** 2 + 1.0 / (hyper.ell * r)) / r2
    return dyad * np.outer(delta, delta) - iso * np.eye(2)


def path_loss_grad(channel: ChannelParams, x) -> np.ndarray:
    """Gradient of the path-loss mean at x, dB per meter."""
    pts = np.asarray(x, dtype=np.float64)
    delta = pts - channel.tx
    d2 = (delta * delta).sum(axis=-1)
    if np.any(d2 == 0.0):
        raise ValueError("path-loss gradient is undefined at the transmitter")
    coeff = -10.0 * channel.eta / _LN10
    return coeff * delta / d2[..., None]


def path_loss_hess(channel: ChannelParams, x) -> np.ndarray:
    """Hessian of the path-loss mean at x."""
    delta = np.asarray(x, dtype=np.float64) - channel.tx
    d2 = float((delta * delta).sum())
    if d2 == 0.0:
        raise ValueError("path-loss Hessian is undefined at the transmitter")
    coeff = 10.0 * channel.eta / _LN10
    return coeff * (2.0 * np.outer(delta, delta) / d2 ** 2 - np.eye(2) / d2)


# --------------------------------------------------------------------------
# posterior-mean calculus; `model` is any object exposing .channel, .hyper,
# .dataset.locations and .alpha (see gp.FittedModel)
# --------------------------------------------------------------------------

def posterior_mean_grad_many(model, eval_pts) -> np.ndarray:
    """Gradient of the posterior mean at each eval point, shape (n, 2)."""
    pts = _rows(eval_pts)
    hyper = model.hyper
    kernel_part = backend.active().grad_sum(
        pts, model.dataset.locations, model.alpha,
        hyper.sigma_k ** 2, hyper.ell, hyper.d_c)
    return path_loss_grad(model.channel, pts) + kernel_part


def posterior_mean_grad(model, x) -> np.ndarray:
    """Gradient of the posterior mean at a single point."""
    return posterior_mean_grad_many(model, x)[0]


def posterior_mean_hess_many(model, eval_pts, include_path_curvature: bool = False,
                             smoothing: float | None = None) -> np.ndarray:
    """Hessians of the posterior mean, packed as rows (h11, h12, h22).

    By default only the kernel sum contributes, matching the correction the
    second-order fit applies; include_path_curvature adds the path-loss term.
    """
    pts = _rows(eval_pts)
    hyper = model.hyper
    floor = hyper.d_c if smoothing is None else smoothing
    packed = backend.active().hess_sum(
        pts, model.dataset.locations, model.alpha,
        hyper.sigma_k ** 2, hyper.ell, floor)
    if include_path_curvature:
        packed = packed.copy() if packed.base is not None else packed
        for i, p in enumerate(pts):
            h = path_loss_hess(model.channel, p)
            packed[i, 0] += h[0, 0]
            packed[i, 1] += h[0, 1]
            packed[i, 2] += h[1, 1]
    return packed


def posterior_mean_hess(model, x, include_path_curvature: bool = False,
                        smoothing: float | None = None) -> np.ndarray:
    """Hessian of the posterior mean at a single point, shape (2, 2)."""
    h11, h12, h22 = posterior_mean_hess_many(
        model, x, include_path_curvature, smoothing)[0]
    return np.array([[h11, h12], [h12, h22]])
