"""Bundled case study: a solar lighting device under thermal step-stress.

35 units started at the normal operating temperature of 293 K; the stress
was raised to 353 K at 500 hours and the test ended at 600 hours, leaving
31 observed failures (capacitor = cause 1, controller = cause 2) and 4
censored units.  Times are in hundred-hours.

The module also carries the published bootstrap elicitation summary for
the reparametrised coordinates of this device, from which the three
stock gamma prior specifications are built.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

import numpy as np

from .cli_io import read_dataset_csv
from .model import Dataset, DesignSpec, StressFrame
from .priors import BootstrapSummary, GammaPrior, build_prior

__all__ = [
    "frame",
    "design",
    "load_dataset",
    "fitted_params",
    "bootstrap_summary",
    "stock_prior",
    "ELICITATION_Q",
]

USE_TEMP_K = 293.0
LOW_TEMP_K = 293.0
HIGH_TEMP_K = 353.0
TAU = 5.0
TC = 6.0
N_UNITS = 35

# quantile level behind the stock elicitation summary; reproduces the
# published posterior summaries of this case study
ELICITATION_Q = 0.001

# bootstrap mean and standard error per phi component,
# order (t_q_1, -b_1, beta_1, t_q_2, -b_2, beta_2)
_BOOT_MEANS = np.array([0.1634, 4.2805, 1.2006, 0.1527, 1.4025, 1.6989])
_BOOT_SES = np.array([0.3705, 1.2737, 1.2724, 0.1550, 0.5039, 0.4604])


def frame() -> StressFrame:
    return StressFrame.from_temperatures(USE_TEMP_K, LOW_TEMP_K, HIGH_TEMP_K)


def design() -> DesignSpec:
    return DesignSpec(frame=frame(), tau=TAU, tc=TC, n=N_UNITS)


@lru_cache(maxsize=1)
def load_dataset() -> Dataset:
    ref = resources.files("ssaltplan.data") / "solar_lighting.csv"
    with resources.as_file(ref) as path:
        return read_dataset_csv(path, design())


@lru_cache(maxsize=1)
def fitted_params():
    """Maximum likelihood fit of the bundled dataset (cached)."""
    from .mle import fit_mle

    return fit_mle(load_dataset()).params


def bootstrap_summary() -> BootstrapSummary:
    return BootstrapSummary(means=_BOOT_MEANS.copy(), ses=_BOOT_SES.copy(), n_valid=1000)


def stock_prior(flavour: str = "I", q: float = ELICITATION_Q) -> GammaPrior:
    """One of the three stock prior specifications (I tight, II wide,
    III wide with shifted acceleration means)."""
    return build_prior(bootstrap_summary(), flavour, q=q)
