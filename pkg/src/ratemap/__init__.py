"""Radio-map rate selection under sensor location uncertainty.

Gaussian-process power maps fitted from noisily located sensor reports,
input-noise-corrected variants, and the Monte Carlo harness that scores the
outage-constrained transmission rates they back.
"""

from .channel import (ChannelParams, NumericalError, capacity, path_loss_mean,
                      received_power, sample_shadow_field, shadow_cov,
                      shadow_cov_matrix, tx_distance)
from .config import (config_from_mapping, config_to_mapping, default_config,
                     load_config, save_config)
from .gp import (FittedModel, NoiseParams, Posterior, SensingDataset,
                 fit_nigp1, fit_nigp2, fit_pure, predict, predict_many)
from .kernels import (DEFAULT_D_C_HESS, KernelHyper, kernel, kernel_grad,
                      kernel_hess, kernel_matrix, posterior_mean_grad,
                      posterior_mean_hess)
from .mc import (METHODS, OutageEstimate, SimConfig, Z95, demo_1d,
                 estimate_outage, find_required_margin, rate_cdf,
                 records_from_posteriors, run_many, run_trial, sweep_sigma_x,
                 trial_rng, wilson_interval)
from .rates import (RateConfig, RateDecision, erfinv, outage_snr,
                    pathloss_rate, rate_from_snr, select_rate, snr_from_rate)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "NumericalError", "capacity", "path_loss_mean",
    "received_power", "sample_shadow_field", "shadow_cov", "shadow_cov_matrix",
    "tx_distance",
    "config_from_mapping", "config_to_mapping", "default_config",
    "load_config", "save_config",
    "FittedModel", "NoiseParams", "Posterior", "SensingDataset",
    "fit_nigp1", "fit_nigp2", "fit_pure", "predict", "predict_many",
    "DEFAULT_D_C_HESS", "KernelHyper", "kernel", "kernel_grad", "kernel_hess",
    "kernel_matrix", "posterior_mean_grad", "posterior_mean_hess",
    "METHODS", "OutageEstimate", "SimConfig", "Z95", "demo_1d",
    "estimate_outage", "find_required_margin", "rate_cdf",
    "records_from_posteriors", "run_many", "run_trial", "sweep_sigma_x",
    "trial_rng", "wilson_interval",
    "RateConfig", "RateDecision", "erfinv", "outage_snr", "pathloss_rate",
    "rate_from_snr", "select_rate", "snr_from_rate",
    "__version__",
]
