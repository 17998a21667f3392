"""YAML configuration for simulation campaigns.

A config file holds up to five sections: channel, kernel, noise, rate, sim.
Every key is optional and falls back to the package defaults; unknown
sections or keys are rejected so typos fail loudly instead of silently
running the default. An absent kernel section derives its hyperparameters
from the channel section.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from .channel import ChannelParams
from .kernels import DEFAULT_D_C_HESS, KernelHyper
from .mc import SimConfig

_SIM_KEYS = ("area_side", "n_sensors", "n_test_points", "n_trials",
             "master_seed", "methods", "nigp_iterations", "nigp2_mean_shift")


def _check_keys(section: str, mapping: dict, allowed: tuple[str, ...]) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ValueError(
            f"unknown key(s) {unknown} in section {section!r}; "
            f"allowed keys are {sorted(allowed)}")


def _section(data: dict, name: str) -> dict:
    got = data.get(name, {})
    if got is None:
        return {}
    if not isinstance(got, dict):
        raise ValueError(f"section {name!r} must be a mapping, got {got!r}")
    return got


def config_from_mapping(data: dict) -> SimConfig:
    """Build a SimConfig from a parsed YAML mapping."""
    if not isinstance(data, dict):
        raise ValueError(f"config root must be a mapping, got {data!r}")
    _check_keys("<root>", data, ("channel", "kernel", "noise", "rate", "sim"))

    ch_map = dict(_section(data, "channel"))
    _check_keys("channel", ch_map,
                ("p_tx", "x_tx", "eta", "sigma_db", "d_cor", "n0"))
    if "x_tx" in ch_map:
        x_tx = ch_map["x_tx"]
        if not (isinstance(x_tx, (list, tuple)) and len(x_tx) == 2):
            raise ValueError(f"channel.x_tx must be a pair, got {x_tx!r}")
        ch_map["x_tx"] = (float(x_tx[0]), float(x_tx[1]))
    channel = ChannelParams(**ch_map)

    k_map = dict(_section(data, "kernel"))
    _check_keys("kernel", k_map, ("sigma_k", "ell", "d_c", "d_c_hess"))
    derived = KernelHyper.from_channel(channel)
    hyper = KernelHyper(
        sigma_k=float(k_map.get("sigma_k", derived.sigma_k)),
        ell=float(k_map.get("ell", derived.ell)),
        d_c=float(k_map.get("d_c", derived.d_c)),
        d_c_hess=float(k_map.get("d_c_hess", DEFAULT_D_C_HESS)))

    base = SimConfig()
    n_map = _section(data, "noise")
    _check_keys("noise", n_map, ("sigma_x", "sigma_y"))
    noise = dataclasses.replace(base.noise,
                                **{k: float(v) for k, v in n_map.items()})

    r_map = _section(data, "rate")
    _check_keys("rate", r_map, ("p_out", "sigma_delta"))
    rate = dataclasses.replace(base.rate,
                               **{k: float(v) for k, v in r_map.items()})

    s_map = dict(_section(data, "sim"))
    _check_keys("sim", s_map, _SIM_KEYS)
    if "methods" in s_map:
        methods = s_map["methods"]
        if not (isinstance(methods, (list, tuple))
                and all(isinstance(m, str) for m in methods)):
            raise ValueError(f"sim.methods must be a list of names, got {methods!r}")
        s_map["methods"] = tuple(methods)
    return SimConfig(channel=channel, hyper=hyper, noise=noise, rate=rate,
                     **s_map)


def load_config(path: str | Path) -> SimConfig:
    """Parse a YAML config file into a SimConfig."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    return config_from_mapping(data)


def config_to_mapping(cfg: SimConfig) -> dict:
    """Plain-dict form of a SimConfig; round-trips through YAML."""
    channel = dataclasses.asdict(cfg.channel)
    channel["x_tx"] = list(cfg.channel.x_tx)
    return {
        "channel": channel,
        "kernel": dataclasses.asdict(cfg.hyper),
        "noise": dataclasses.asdict(cfg.noise),
        "rate": dataclasses.asdict(cfg.rate),
        "sim": {
            "area_side": cfg.area_side,
            "n_sensors": cfg.n_sensors,
            "n_test_points": cfg.n_test_points,
            "n_trials": cfg.n_trials,
            "master_seed": cfg.master_seed,
            "methods": list(cfg.methods),
            "nigp_iterations": cfg.nigp_iterations,
            "nigp2_mean_shift": cfg.nigp2_mean_shift,
        },
    }


def save_config(cfg: SimConfig, path: str | Path) -> None:
    """Write a config file that load_config restores exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_mapping(cfg), fh, sort_keys=False)


def default_config() -> SimConfig:
    """The baseline campaign configuration."""
    return SimConfig()
