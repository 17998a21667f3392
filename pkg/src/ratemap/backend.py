"""Numeric hot loops with a numba fast path and a pure-numpy fallback.

Three operations dominate simulation time: assembling exponential covariance
matrices, and accumulating weighted kernel gradients and Hessians over a
sensing dataset. Both implementations compute identical formulas; the numba
versions are plain compiled loops, the numpy versions are broadcast
expressions.

Selection happens once at import. The environment variable RATEMAP_BACKEND
forces "numba" or "numpy"; unset, numba is used when importable. `use()`
switches at runtime (tests and benchmarks rely on this).

All distances are smoothed as r = sqrt(d^2 + floor^2), so every function here
is differentiable in the coordinates even at coincident points. Passing
floor=0 recovers the plain exponential in d.
"""

from __future__ import annotations

import math
import os
from typing import Callable, NamedTuple

import numpy as np

ENV_VAR = "RATEMAP_BACKEND"


class Backend(NamedTuple):
    name: str
    cov_matrix: Callable
    grad_sum: Callable
    hess_sum: Callable


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def _cov_matrix_np(a: np.ndarray, b: np.ndarray, amp2: float, scale: float,
                   floor: float) -> np.ndarray:
    """amp2 * exp(-r/scale) for every row pair of a (n,2) and b (m,2)."""
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    r = np.sqrt(dx * dx + dy * dy + floor * floor)
    return amp2 * np.exp(-r / scale)


def _grad_sum_np(eval_pts: np.ndarray, data_pts: np.ndarray, weights: np.ndarray,
                 amp2: float, scale: float, floor: float) -> np.ndarray:
    """Rows of sum_j w_j * grad_x k(x, x_j) evaluated at each eval point.

    grad_x k = -amp2 * exp(-r/scale) * (x - x_j) / (scale * r), exact for the
    smoothed r.
    """
    dx = eval_pts[:, None, 0] - data_pts[None, :, 0]
    dy = eval_pts[:, None, 1] - data_pts[None, :, 1]
    r = np.sqrt(dx * dx + dy * dy + floor * floor)
    w = weights[None, :] * amp2 * np.exp(-r / scale) / (scale * r)
    out = np.empty((eval_pts.shape[0], 2))
    out[:, 0] = -(w * dx).sum(axis=1)
    out[:, 1] = -(w * dy).sum(axis=1)
    return out


def _hess_sum_np(eval_pts: np.ndarray, data_pts: np.ndarray, weights: np.ndarray,
                 amp2: float, scale: float, floor: float) -> np.ndarray:
    """Rows of sum_j w_j * hess_x k(x, x_j), packed as (h11, h12, h22).

    hess_x k has entries
        amp2*exp(-r/scale) * (-delta_mn/(scale*r)
                              + dm*dn/r^2 * (1/scale^2 + 1/(scale*r)))
    which is the exact second derivative for the smoothed r.
    """
    dx = eval_pts[:, None, 0] - data_pts[None, :, 0]
    dy = eval_pts[:, None, 1] - data_pts[None, :, 1]
    r2 = dx * dx + dy * dy + floor * floor
    r = np.sqrt(r2)
    e = weights[None, :] * amp2 * np.exp(-r / scale)
    iso = e / (scale * r)
    dyad = e * (1.0 / (scale * scale) + 1.0 / (scale * r)) / r2
    out = np.empty((eval_pts.shape[0], 3))
    out[:, 0] = (dyad * dx * dx - iso).sum(axis=1)
    out[:, 1] = (dyad * dx * dy).sum(axis=1)
    out[:, 2] = (dyad * dy * dy - iso).sum(axis=1)
    return out


NUMPY_BACKEND = Backend("numpy", _cov_matrix_np, _grad_sum_np, _hess_sum_np)


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via RATEMAP_BACKEND=numpy
    numba = None
    HAS_NUMBA = False

if HAS_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _cov_matrix_nb(a, b, amp2, scale, floor):
        n = a.shape[0]
        m = b.shape[0]
        out = np.empty((n, m))
        f2 = floor * floor
        for i in range(n):
            for j in range(m):
                dx = a[i, 0] - b[j, 0]
                dy = a[i, 1] - b[j, 1]
                r = math.sqrt(dx * dx + dy * dy + f2)
                out[i, j] = amp2 * math.exp(-r / scale)
        return out

    @numba.njit(cache=True, nogil=True)
    def _grad_sum_nb(eval_pts, data_pts, weights, amp2, scale, floor):
        n = eval_pts.shape[0]
        m = data_pts.shape[0]
        out = np.zeros((n, 2))
        f2 = floor * floor
        for i in range(n):
            gx = 0.0
            gy = 0.0
            for j in range(m):
                dx = eval_pts[i, 0] - data_pts[j, 0]
                dy = eval_pts[i, 1] - data_pts[j, 1]
                r = math.sqrt(dx * dx + dy * dy + f2)
                w = weights[j] * amp2 * math.exp(-r / scale) / (scale * r)
                gx -= w * dx
                gy -= w * dy
            out[i, 0] = gx
            out[i, 1] = gy
        return out

    @numba.njit(cache=True, nogil=True)
    def _hess_sum_nb(eval_pts, data_pts, weights, amp2, scale, floor):
        n = eval_pts.shape[0]
        m = data_pts.shape[0]
        out = np.zeros((n, 3))
        f2 = floor * floor
        inv_s2 = 1.0 / (scale * scale)
        for i in range(n):
            h11 = 0.0
            h12 = 0.0
            h22 = 0.0
            for j in range(m):
                dx = eval_pts[i, 0] - data_pts[j, 0]
                dy = eval_pts[i, 1] - data_pts[j, 1]
                r2 = dx * dx + dy * dy + f2
                r = math.sqrt(r2)
                e = weights[j] * amp2 * math.exp(-r / scale)
                iso = e / (scale * r)
                dyad = e * (inv_s2 + 1.0 / (scale * r)) / r2
                h11 += dyad * dx * dx - iso
                h12 += dyad * dx * dy
                h22 += dyad * dy * dy - iso
            out[i, 0] = h11
            out[i, 1] = h12
            out[i, 2] = h22
        return out

    NUMBA_BACKEND = Backend("numba", _cov_matrix_nb, _grad_sum_nb, _hess_sum_nb)
else:
    NUMBA_BACKEND = None


# --------------------------------------------------------------------------
# selection
# --------------------------------------------------------------------------

def _resolve(name: str | None) -> Backend:
    if name is None or name == "":
        return NUMBA_BACKEND if HAS_NUMBA else NUMPY_BACKEND
    key = name.strip().lower()
    if key == "numpy":
        return NUMPY_BACKEND
    if key == "numba":
        if not HAS_NUMBA:
            raise RuntimeError(
                "RATEMAP_BACKEND=numba requested but numba is not importable")
        return NUMBA_BACKEND
    raise ValueError(f"unknown backend {name!r}, expected 'numba' or 'numpy'")


_active = _resolve(os.environ.get(ENV_VAR))


def active() -> Backend:
    """The backend currently in use."""
    return _active


def use(name: str | None) -> str:
    """Switch backends, returning the previous backend's name."""
    global _active
    previous = _active.name
    _active = _resolve(name)
    return previous
