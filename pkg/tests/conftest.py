"""Shared fixtures: a default channel and small deterministic scenes."""

from __future__ import annotations

import numpy as np
import pytest

from ratemap.channel import ChannelParams, path_loss_mean, sample_shadow_field
from ratemap.gp import NoiseParams, SensingDataset
from ratemap.kernels import KernelHyper


@pytest.fixture(scope="session")
def channel() -> ChannelParams:
    return ChannelParams()


@pytest.fixture(scope="session")
def hyper(channel) -> KernelHyper:
    return KernelHyper.from_channel(channel)


def make_scene(channel: ChannelParams, seed: int, n: int = 8,
               sigma_x: float = 0.0, sigma_y: float = 2.0,
               side: float = 300.0) -> tuple[SensingDataset, NoiseParams]:
    """A small consistent dataset drawn from the ground-truth field."""
    rng = np.random.default_rng(seed)
    locations = rng.uniform(0.0, side, (n, 2))
    shadow = sample_shadow_field(channel, locations, rng)
    observations = (path_loss_mean(channel, locations) + shadow
                    + rng.standard_normal(n) * sigma_y)
    return SensingDataset(locations, observations), NoiseParams(
        sigma_x=sigma_x, sigma_y=sigma_y)
