"""GP regression of the received-power map, with input-noise corrections.

All fits share the same structure: factorize K' = K + diag(noise terms),
solve K' alpha = y - p_bar, predict with the usual conditional mean and
variance. The three fit flavors differ only in the diagonal:

  pure    observation noise sigma_y^2 only
  nigp1   + sigma_x^2 * |grad posterior mean|^2 at each sensing location,
          the first-order effect of uncertain sensing locations
  nigp2   + 0.5 * trace((H Sigma_x)^2) with H the posterior-mean Hessian,
          the second-order term

Gradients and Hessians are taken from the preceding (uncorrected) fit, one
correction pass by default. Curvature for the second-order term is evaluated
with the d_c_hess floor, because the exact curvature of an exponential-kernel
posterior mean diverges like 1/r at the sensing locations themselves.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .channel import ChannelParams, NumericalError, path_loss_mean
from .kernels import (KernelHyper, kernel_diag_value, kernel_matrix,
                      posterior_mean_grad_many, posterior_mean_hess_many)

log = logging.getLogger(__name__)

# Relative bound on ||K' alpha - residual||; exceeding it means the solve is
# untrustworthy and the trial must be treated as failed.
SOLVE_RTOL = 1e-8


@dataclass(frozen=True)
class NoiseParams:
    """Noise model of the sensing process.

    sigma_x  location-noise standard deviation per axis, meters
    sigma_y  observation-noise standard deviation, dB
    """

    sigma_x: float = 0.0
    sigma_y: float = 0.0

    def __post_init__(self) -> None:
        if not (self.sigma_x >= 0 and math.isfinite(self.sigma_x)):
            raise ValueError(f"sigma_x must be non-negative, got {self.sigma_x}")
        if not (self.sigma_y >= 0 and math.isfinite(self.sigma_y)):
            raise ValueError(f"sigma_y must be non-negative, got {self.sigma_y}")


@dataclass
class SensingDataset:
    """Reported sensing locations (N, 2) and observed powers (N,) in dBm."""

    locations: np.ndarray
    observations: np.ndarray

    def __post_init__(self) -> None:
        self.locations = np.ascontiguousarray(self.locations, dtype=np.float64)
        self.observations = np.ascontiguousarray(self.observations, dtype=np.float64)
        if self.locations.ndim != 2 or self.locations.shape[1] != 2:
            raise ValueError(f"locations must be (N, 2), got {self.locations.shape}")
        if self.observations.shape != (len(self.locations),):
            raise ValueError("observations must match locations in length")
        if not np.all(np.isfinite(self.locations)):
            raise ValueError("locations must be finite")
        if not np.all(np.isfinite(self.observations)):
            raise ValueError("observations must be finite")

    def __len__(self) -> int:
        return len(self.locations)


@dataclass(frozen=True)
class Posterior:
    """Predictive distribution of received power at one point, in dB."""

    mean: float
    std: float


@dataclass
class FittedModel:
    method: str
    dataset: SensingDataset
    channel: ChannelParams
    hyper: KernelHyper
    noise: NoiseParams
    prior_mean: np.ndarray
    base_cov: np.ndarray
    noise_diag: np.ndarray
    jitter: float
    chol: np.ndarray
    alpha: np.ndarray


def _factorize(cov: np.ndarray, hyper: KernelHyper) -> tuple[np.ndarray, float]:
    """Cholesky of cov, adding 1e-8*sigma_k^2 jitter only when needed."""
    try:
        return np.linalg.cholesky(cov), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-8 * hyper.sigma_k ** 2
    eye = np.eye(cov.shape[0])
    for _ in range(4):
        try:
            return np.linalg.cholesky(cov + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        f"kernel matrix factorization failed up to jitter {jitter / 10.0:.3e} "
        f"(condition estimate {np.linalg.cond(cov):.3e})")


def _fit(dataset: SensingDataset, channel: ChannelParams, hyper: KernelHyper,
         noise: NoiseParams, method: str, extra_diag: np.ndarray | None = None,
         y_shift: np.ndarray | None = None,
         base_cov: np.ndarray | None = None) -> FittedModel:
    n = len(dataset)
    if base_cov is None:
        base_cov = kernel_matrix(hyper, dataset.locations)
    noise_diag = np.full(n, noise.sigma_y ** 2)
    if extra_diag is not None:
        noise_diag = noise_diag + extra_diag
    cov = base_cov.copy()
    cov[np.diag_indices(n)] += noise_diag
    chol, jitter = _factorize(cov, hyper)

    prior_mean = np.asarray(path_loss_mean(channel, dataset.locations))
    resid = dataset.observations - prior_mean
    if y_shift is not None:
        resid = resid - y_shift
    alpha = solve_triangular(chol, solve_triangular(chol, resid, lower=True),
                             lower=True, trans=1)

    # Guard the solve: an inaccurate alpha poisons every downstream quantity.
    if jitter:
        cov[np.diag_indices(n)] += jitter
    err = np.linalg.norm(cov @ alpha - resid)
    limit = SOLVE_RTOL * max(np.linalg.norm(resid), 1e-300)
    if err > limit:
        raise NumericalError(
            f"linear solve residual {err:.3e} exceeds {limit:.3e} for {method}")

    return FittedModel(method=method, dataset=dataset, channel=channel,
                       hyper=hyper, noise=noise, prior_mean=prior_mean,
                       base_cov=base_cov, noise_diag=noise_diag, jitter=jitter,
                       chol=chol, alpha=alpha)


def fit_pure(dataset: SensingDataset, channel: ChannelParams,
             hyper: KernelHyper, noise: NoiseParams) -> FittedModel:
    """Fit that ignores location noise (exact GP for sigma_x = 0)."""
    return _fit(dataset, channel, hyper, noise, "pure_gp")


def first_order_noise_diag(model: FittedModel) -> np.ndarray:
    """sigma_x^2 * |grad posterior mean|^2 at each sensing location."""
    grads = posterior_mean_grad_many(model, model.dataset.locations)
    return model.noise.sigma_x ** 2 * (grads * grads).sum(axis=1)


def second_order_noise_diag(model: FittedModel,
                            include_path_curvature: bool = False) -> np.ndarray:
    """0.5 * trace((H Sigma_x)^2) per sensing location.

    With isotropic Sigma_x this is 0.5 * sigma_x^4 * (h11^2 + 2 h12^2 + h22^2),
    the Hessian evaluated with the d_c_hess curvature floor.
    """
    packed = posterior_mean_hess_many(
        model, model.dataset.locations, include_path_curvature,
        smoothing=model.hyper.d_c_hess)
    h11, h12, h22 = packed[:, 0], packed[:, 1], packed[:, 2]
    return 0.5 * model.noise.sigma_x ** 4 * (h11 ** 2 + 2.0 * h12 ** 2 + h22 ** 2)


def curvature_mean_shift(model: FittedModel,
                         include_path_curvature: bool = False) -> np.ndarray:
    """0.5 * trace(H Sigma_x), the curvature-induced observation bias."""
    packed = posterior_mean_hess_many(
        model, model.dataset.locations, include_path_curvature,
        smoothing=model.hyper.d_c_hess)
    return 0.5 * model.noise.sigma_x ** 2 * (packed[:, 0] + packed[:, 2])


def fit_nigp1(dataset: SensingDataset, channel: ChannelParams,
              hyper: KernelHyper, noise: NoiseParams, iterations: int = 1,
              pure_fit: FittedModel | None = None) -> FittedModel:
    """First-order input-noise correction, one pass by default.

    pure_fit lets callers reuse an existing sigma_x-agnostic fit of the same
    dataset as pass one instead of refitting it.
    """
    model = pure_fit if pure_fit is not None \
        else fit_pure(dataset, channel, hyper, noise)
    for _ in range(iterations):
        extra = first_order_noise_diag(model)
        model = _fit(dataset, channel, hyper, noise, "nigp1",
                     extra_diag=extra, base_cov=model.base_cov)
    return model


def fit_nigp2(dataset: SensingDataset, channel: ChannelParams,
              hyper: KernelHyper, noise: NoiseParams, iterations: int = 1,
              mean_shift: bool = False, include_path_curvature: bool = False,
              pure_fit: FittedModel | None = None) -> FittedModel:
    """First- plus second-order input-noise correction.

    Both diagonal terms are rebuilt from the preceding pass. The optional
    mean shift subtracts the curvature-induced bias from the observations.
    """
    model = pure_fit if pure_fit is not None \
        else fit_pure(dataset, channel, hyper, noise)
    for _ in range(iterations):
        extra = (first_order_noise_diag(model)
                 + second_order_noise_diag(model, include_path_curvature))
        shift = None
        if mean_shift:
            shift = curvature_mean_shift(model, include_path_curvature)
        model = _fit(dataset, channel, hyper, noise, "nigp2",
                     extra_diag=extra, y_shift=shift, base_cov=model.base_cov)
    return model


def predict_many(model: FittedModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and std at each row of points.

    Variance is clamped at zero; a clamp deeper than 1e-8 * sigma_k^2 is
    logged because it signals a conditioning problem rather than roundoff.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    cross = kernel_matrix(model.hyper, pts, model.dataset.locations)
    mean = np.asarray(path_loss_mean(model.channel, pts)) + cross @ model.alpha
    v = solve_triangular(model.chol, cross.T, lower=True)
    var = kernel_diag_value(model.hyper) - (v * v).sum(axis=0)
    floor = -1e-8 * model.hyper.sigma_k ** 2
    if np.any(var < floor):
        log.warning("predictive variance clamped from %.3e", float(var.min()))
    return mean, np.sqrt(np.maximum(var, 0.0))


def predict(model: FittedModel, x_star) -> Posterior:
    """Posterior at a single point."""
    mean, std = predict_many(model, x_star)
    return Posterior(mean=float(mean[0]), std=float(std[0]))
