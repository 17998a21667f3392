"""Ground-truth radio channel: log-distance path loss plus correlated shadowing.

Received power in dBm at location x is

    p_rx(x) = p_tx - 10*eta*log10(d(x_tx, x)) + w(x)

where w is a zero-mean Gaussian shadowing field whose covariance between two
points depends only on their separation d and halves every d_cor meters:

    cov(d) = sigma_db^2 * exp(-d * ln2 / d_cor)

Capacity is evaluated per unit bandwidth against the noise floor n0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend

_LN2 = math.log(2.0)


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond the configured jitter retries."""


@dataclass(frozen=True)
class ChannelParams:
    """Propagation constants of the ground-truth channel.

    p_tx     transmit power, dBm
    x_tx     transmitter location, meters
    eta      path-loss exponent
    sigma_db shadowing standard deviation, dB
    d_cor    decorrelation distance, meters (covariance halves here)
    n0       noise power, dBm
    """

    p_tx: float = 10.0
    x_tx: tuple[float, float] = (-10.0, 150.0)
    eta: float = 3.0
    sigma_db: float = 6.0
    d_cor: float = 50.0
    n0: float = -174.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.x_tx) or len(self.x_tx) != 2:
            raise ValueError(f"x_tx must be two finite coordinates, got {self.x_tx}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not (self.sigma_db >= 0 and math.isfinite(self.sigma_db)):
            raise ValueError(f"sigma_db must be non-negative, got {self.sigma_db}")
        if not (self.d_cor > 0 and math.isfinite(self.d_cor)):
            raise ValueError(f"d_cor must be positive, got {self.d_cor}")
        for name in ("p_tx", "n0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def tx(self) -> np.ndarray:
        return np.asarray(self.x_tx, dtype=np.float64)


def tx_distance(channel: ChannelParams, x) -> np.ndarray | float:
    """Distance from the transmitter, vectorized over rows of x."""
    pts = np.asarray(x, dtype=np.float64)
    delta = pts - channel.tx
    return np.sqrt((delta * delta).sum(axis=-1))


def path_loss_mean(channel: ChannelParams, x) -> np.ndarray | float:
    """Deterministic received power in dBm at x (no shadowing).

    Raises ValueError when any point coincides with the transmitter, where
    the log-distance model is singular.
    """
    d = tx_distance(channel, x)
    if np.any(d == 0.0):
        raise ValueError("path loss is undefined at the transmitter location")
    return channel.p_tx - 10.0 * channel.eta * np.log10(d)


def shadow_cov(channel: ChannelParams, d) -> np.ndarray | float:
    """Shadowing covariance at separation d (meters)."""
    d = np.asarray(d, dtype=np.float64)
    out = channel.sigma_db ** 2 * np.exp(-d * _LN2 / channel.d_cor)
    return out if out.ndim else float(out)


def shadow_cov_matrix(channel: ChannelParams, points: np.ndarray) -> np.ndarray:
    """Covariance matrix of the shadowing field at the given points."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    return backend.active().cov_matrix(
        pts, pts, channel.sigma_db ** 2, channel.d_cor / _LN2, 0.0)


def _cholesky_with_jitter(matrix: np.ndarray, base_jitter: float,
                          retries: int = 3) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of matrix + jitter*I, escalating jitter x10.

    The base jitter is always applied. Raises NumericalError with a condition
    estimate after the final retry.
    """
    jitter = base_jitter
    eye = np.eye(matrix.shape[0])
    for _ in range(retries + 1):
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    cond = np.linalg.cond(matrix)
    raise NumericalError(
        f"Cholesky failed up to jitter {jitter / 10.0:.3e} "
        f"(condition estimate {cond:.3e})")


def sample_shadow_field(channel: ChannelParams, points: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """One joint draw of the shadowing field at the given points.

    Consumes exactly len(points) standard normals from rng, so draw order in
    a trial stays reproducible. Coincident points receive equal values up to
    the stabilizing jitter (1e-9 * sigma_db^2, escalated on failure).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    cov = shadow_cov_matrix(channel, pts)
    factor, _ = _cholesky_with_jitter(cov, 1e-9 * channel.sigma_db ** 2)
    return factor @ rng.standard_normal(len(pts))


def received_power(channel: ChannelParams, x, shadow) -> np.ndarray | float:
    """Ground-truth received power: path loss mean plus shadowing values."""
    return path_loss_mean(channel, x) + np.asarray(shadow, dtype=np.float64)


def capacity(p_rx_dbm, n0: float) -> np.ndarray | float:
    """Achievable rate per unit bandwidth at received power p_rx_dbm.

    log2(1 + snr) with snr = 10^((p_rx - n0)/10); log1p keeps the deep-fade
    tail accurate.
    """
    p = np.asarray(p_rx_dbm, dtype=np.float64)
    out = np.log1p(np.power(10.0, (p - n0) / 10.0)) / _LN2
    return out if out.ndim else float(out)
