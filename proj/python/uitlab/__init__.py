"""Python access to the uitlab experiments.

The heavy lifting happens in the compiled ``_uitlab`` extension; this module
re-exports it and adds a couple of conveniences for configs held as dicts.
"""

import json as _json

from ._uitlab import (
    BudgetExceeded,
    ConfigError,
    ErrorCurve,
    FitFailure,
    IoError,
    NumericalBlowup,
    RateFit,
    analytic_error,
    averaged_drift,
    estimate_contraction,
    exact_difference,
    fit_power_law,
    gaussian_closure_law,
    hmc_bias_curve,
    mean_and_se,
    particle_drift,
    plateau_stat,
    simulate_counterexample,
    simulate_poc_error,
    simulate_strong_error,
    simulate_weak_error,
    ubu_strong_error,
    ula_strong_error,
    version,
    w2_empirical_1d,
    w2_gaussian,
)
from ._uitlab import run_config as _run_config

__version__ = version().split()[1]


def run(config, out_dir="", threads=0):
    """Run an experiment described by a dict, a JSON string or a path."""
    if isinstance(config, dict):
        text = _json.dumps(config)
    elif isinstance(config, str) and config.lstrip().startswith("{"):
        text = config
    else:
        with open(config, encoding="utf-8") as fh:
            text = fh.read()
    return _run_config(text, str(out_dir), threads)


__all__ = [name for name in dir() if not name.startswith("_")]
