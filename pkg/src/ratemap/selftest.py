"""Embedded invariant suite behind the `selftest` subcommand.

Each check returns a scalar badness measure (worst relative error, violation
count) so the test suite can reuse them at higher repetition counts. run()
executes the whole battery with conservative thresholds and prints one line
per check.
"""

from __future__ import annotations

import math
import sys
from typing import Callable

import numpy as np
from scipy.special import erf as _erf

from . import backend
from .channel import ChannelParams, capacity, path_loss_mean, sample_shadow_field
from .gp import (NoiseParams, SensingDataset, fit_nigp1, fit_nigp2, fit_pure,
                 predict_many)
from .kernels import (KernelHyper, kernel, kernel_grad, kernel_hess,
                      kernel_matrix, posterior_mean_grad_many,
                      posterior_mean_hess_many)
from .rates import RateConfig, erfinv, select_rate


def fd_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
            h: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of a 2-vector."""
    out = np.empty(2)
    for m in range(2):
        e = np.zeros(2)
        e[m] = h
        out[m] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def fd_hess(f: Callable[[np.ndarray], float], x: np.ndarray,
            h: float) -> np.ndarray:
    """Central-difference Hessian of a scalar function of a 2-vector."""
    out = np.empty((2, 2))
    f0 = f(x)
    for m in range(2):
        e = np.zeros(2)
        e[m] = h
        out[m, m] = (f(x + e) - 2.0 * f0 + f(x - e)) / (h * h)
    e1 = np.array([h, 0.0])
    e2 = np.array([0.0, h])
    out[0, 1] = out[1, 0] = (f(x + e1 + e2) - f(x + e1 - e2)
                             - f(x - e1 + e2) + f(x - e1 - e2)) / (4.0 * h * h)
    return out


def _rel(err: np.ndarray, ref: np.ndarray) -> float:
    """Norm-relative deviation, guarded against a vanishing reference."""
    denom = float(np.linalg.norm(ref))
    return float(np.linalg.norm(err)) / max(denom, 1e-300)


def _random_pair(rng: np.random.Generator, side: float = 300.0,
                 min_sep: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    while True:
        x, xi = rng.uniform(0.0, side, (2, 2))
        if float(np.hypot(*(x - xi))) >= min_sep:
            return x, xi


def _random_hyper(rng: np.random.Generator) -> KernelHyper:
    return KernelHyper(sigma_k=float(rng.uniform(2.0, 10.0)),
                       ell=float(rng.uniform(20.0, 120.0)))


def erfinv_roundtrip_error(n: int = 10_000) -> float:
    """Worst |erf(erfinv(u)) - u| over a symmetric grid inside (-1, 1)."""
    u = np.linspace(-(1.0 - 1e-12), 1.0 - 1e-12, n)
    return float(np.max(np.abs(_erf(erfinv(u)) - u)))


def kernel_grad_fd_error(n_configs: int, seed: int = 0,
                         step: float = 1e-4) -> float:
    """Worst norm-relative gap between kernel_grad and central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        hyper = _random_hyper(rng)
        x, xi = _random_pair(rng)
        analytic = kernel_grad(hyper, x, xi)
        numeric = fd_grad(lambda p: kernel(hyper, p, xi), x, step)
        worst = max(worst, _rel(numeric - analytic, analytic))
    return worst


def kernel_hess_fd_error(n_configs: int, seed: int = 0,
                         step: float = 1e-3) -> float:
    """Worst norm-relative gap between kernel_hess and second differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        hyper = _random_hyper(rng)
        x, xi = _random_pair(rng)
        analytic = kernel_hess(hyper, x, xi)
        numeric = fd_hess(lambda p: kernel(hyper, p, xi), x, step)
        worst = max(worst, _rel(numeric - analytic, analytic))
    return worst


def _random_model(rng: np.random.Generator, n: int = 25,
                  sigma_x: float = 0.0):
    channel = ChannelParams()
    hyper = KernelHyper.from_channel(channel)
    sensors = rng.uniform(0.0, 300.0, (n, 2))
    shadow = sample_shadow_field(channel, sensors, rng)
    obs = path_loss_mean(channel, sensors) + shadow
    dataset = SensingDataset(sensors, obs)
    model = fit_pure(dataset, channel, hyper, NoiseParams(sigma_x=sigma_x))
    return model


def _eval_point_away_from(rng: np.random.Generator, locations: np.ndarray,
                          min_dist: float = 5.0) -> np.ndarray:
    while True:
        x = rng.uniform(20.0, 280.0, 2)
        d = np.hypot(*(locations - x).T)
        if float(d.min()) >= min_dist and float(np.hypot(*(x - np.array([-10.0, 150.0])))) >= min_dist:
            return x


def posterior_grad_fd_error(n_configs: int, seed: int = 0,
                            step: float = 1e-2) -> float:
    """Worst gap between the posterior-mean gradient and differences of it."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        model = _random_model(rng)

        def mean_at(p: np.ndarray) -> float:
            return float(predict_many(model, p[None, :])[0][0])

        x = _eval_point_away_from(rng, model.dataset.locations)
        analytic = posterior_mean_grad_many(model, x[None, :])[0]
        numeric = fd_grad(mean_at, x, step)
        worst = max(worst, _rel(numeric - analytic, analytic))
    return worst


def posterior_hess_fd_error(n_configs: int, seed: int = 0,
                            step: float = 1e-2) -> float:
    """Worst gap between the kernel-sum curvature and second differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_configs):
        model = _random_model(rng)

        def kernel_sum_at(p: np.ndarray) -> float:
            row = kernel_matrix(model.hyper, p[None, :],
                                model.dataset.locations)
            return float(row[0] @ model.alpha)

        x = _eval_point_away_from(rng, model.dataset.locations)
        h11, h12, h22 = posterior_mean_hess_many(model, x[None, :])[0]
        analytic = np.array([[h11, h12], [h12, h22]])
        numeric = fd_hess(kernel_sum_at, x, step)
        worst = max(worst, _rel(numeric - analytic, analytic))
    return worst


def variance_ordering_violations(n_fixtures: int, seed: int = 0,
                                 slack: float = 1e-10) -> int:
    """Count test points where predictive variances break the method order.

    The input-noise corrections only ever add to the noise diagonal, so
    std_nigp2 >= std_nigp1 >= std_pure must hold pointwise.
    """
    rng = np.random.default_rng(seed)
    channel = ChannelParams()
    hyper = KernelHyper.from_channel(channel)
    violations = 0
    for _ in range(n_fixtures):
        sigma_x = float(rng.uniform(5.0, 20.0))
        n = int(rng.integers(20, 60))
        sensors = rng.uniform(0.0, 300.0, (n, 2))
        shadow = sample_shadow_field(channel, sensors, rng)
        obs = path_loss_mean(channel, sensors) + shadow
        noisy = sensors + rng.standard_normal((n, 2)) * sigma_x
        dataset = SensingDataset(noisy, obs)
        noise = NoiseParams(sigma_x=sigma_x)

        pure = fit_pure(dataset, channel, hyper, noise)
        nigp1 = fit_nigp1(dataset, channel, hyper, noise, pure_fit=pure)
        nigp2 = fit_nigp2(dataset, channel, hyper, noise, pure_fit=pure)
        tests = rng.uniform(0.0, 300.0, (10, 2))
        _, s0 = predict_many(pure, tests)
        _, s1 = predict_many(nigp1, tests)
        _, s2 = predict_many(nigp2, tests)
        violations += int(np.count_nonzero(s1 < s0 - slack))
        violations += int(np.count_nonzero(s2 < s1 - slack))
    return violations


def sigma_zero_collapse(seed: int = 0) -> bool:
    """With sigma_x = 0 all three GP fits must coincide bitwise."""
    rng = np.random.default_rng(seed)
    model = _random_model(rng, n=40)
    ds, ch, hy, nz = model.dataset, model.channel, model.hyper, model.noise
    nigp1 = fit_nigp1(ds, ch, hy, nz, pure_fit=model)
    nigp2 = fit_nigp2(ds, ch, hy, nz, mean_shift=True, pure_fit=model)
    return (np.array_equal(model.alpha, nigp1.alpha)
            and np.array_equal(model.alpha, nigp2.alpha)
            and np.array_equal(model.chol, nigp2.chol))


def backend_parity_error(seed: int = 0) -> float | None:
    """Worst relative gap between the numpy and accelerated backends.

    Returns None when only one backend is available.
    """
    if not backend.HAS_NUMBA:
        return None
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 300.0, (40, 2))
    b = rng.uniform(0.0, 300.0, (25, 2))
    w = rng.standard_normal(25)
    args_cov = (a, b, 36.0, 72.0, 1e-3)
    args_sum = (a, b, w, 36.0, 72.0, 1e-3)

    prev = backend.use("numpy")
    try:
        ref = (backend.active().cov_matrix(*args_cov),
               backend.active().grad_sum(*args_sum),
               backend.active().hess_sum(*args_sum))
        backend.use("numba")
        alt = (backend.active().cov_matrix(*args_cov),
               backend.active().grad_sum(*args_sum),
               backend.active().hess_sum(*args_sum))
    finally:
        backend.use(prev)
    return max(_rel(x - y, y) for x, y in zip(alt, ref))


def rate_calibration_offset(n_posteriors: int = 5, draws: int = 100_000,
                            seed: int = 0, p_out: float = 1e-3) -> float:
    """Worst |empirical outage - p_out| in standard errors.

    Draws received powers from each posterior and counts how often they fall
    below the selected rate's required power.
    """
    rng = np.random.default_rng(seed)
    cfg = RateConfig(p_out=p_out)
    n0 = -174.0
    se = math.sqrt(p_out * (1.0 - p_out) / draws)
    worst = 0.0
    for _ in range(n_posteriors):
        mean = float(rng.uniform(-80.0, -40.0))
        std = float(rng.uniform(0.5, 8.0))
        gamma = mean - n0 + math.sqrt(2.0) * std * erfinv(2.0 * p_out - 1.0)
        power = rng.standard_normal(draws) * std + mean
        phat = float(np.count_nonzero(power - n0 < gamma)) / draws
        worst = max(worst, abs(phat - p_out) / se)
    return worst


def capacity_spot_error() -> float:
    """Deviation of the capacity map from a frozen high-precision value."""
    want = 41.191908376603867461
    got = float(capacity(-50.0, -174.0))
    return abs(got - want) / want


def run(argv: list[str] | None = None) -> int:
    """Execute every check; print one line each; 0 iff all pass."""
    del argv
    checks: list[tuple[str, Callable[[], bool], str]] = []

    def add(name: str, fn: Callable[[], float | int | bool | None],
            ok: Callable[[object], bool], describe: str) -> None:
        checks.append((name, lambda: ok(fn()), describe))

    add("erfinv round-trip", lambda: erfinv_roundtrip_error(4001),
        lambda v: v <= 1e-9, "max |erf(erfinv(u)) - u| <= 1e-9")
    add("kernel gradient vs differences", lambda: kernel_grad_fd_error(20),
        lambda v: v <= 1e-6, "relative error <= 1e-6")
    add("kernel curvature vs differences", lambda: kernel_hess_fd_error(20),
        lambda v: v <= 1e-4, "relative error <= 1e-4")
    add("posterior gradient vs differences", lambda: posterior_grad_fd_error(5),
        lambda v: v <= 1e-5, "relative error <= 1e-5")
    add("posterior curvature vs differences", lambda: posterior_hess_fd_error(5),
        lambda v: v <= 1e-4, "relative error <= 1e-4")
    add("predictive variance ordering",
        lambda: variance_ordering_violations(10),
        lambda v: v == 0, "no violations")
    add("noise-free fits coincide", sigma_zero_collapse,
        lambda v: bool(v), "bitwise equal alphas")
    add("backend parity", backend_parity_error,
        lambda v: v is None or v <= 1e-12,
        "numpy and accelerated agree to 1e-12")
    add("rate selection calibration", lambda: rate_calibration_offset(),
        lambda v: v <= 4.0, "within 4 standard errors")
    add("capacity reference value", capacity_spot_error,
        lambda v: v <= 1e-15, "matches frozen value")

    failures = 0
    for name, passed, describe in checks:
        try:
            ok = passed()
        except Exception as exc:  # surface, keep running the rest
            print(f"FAIL {name}: raised {exc!r}")
            failures += 1
            continue
        if ok:
            print(f"ok   {name}")
        else:
            print(f"FAIL {name}: expected {describe}")
            failures += 1
    if failures:
        print(f"{failures} of {len(checks)} checks failed", file=sys.stderr)
        return 2
    print(f"all {len(checks)} checks passed")
    return 0
