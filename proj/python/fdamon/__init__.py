"""Monitoring of daily sensor profiles with functional principal components and MEWMA charts."""

import json

from ._core import (
    DataError,
    FdamonError,
    MewmaChart,
    NumericalError,
    SplineBasis,
    arl,
    arl_monte_carlo,
    calibrate_h4,
    chi2_cdf,
    chi2_quantile,
    conditional_scores,
    error_covariance,
    estimate_baseline_cov,
    fit,
    hotelling_t2,
    run_chart,
    score,
    simulate,
)


def load_truth(sim):
    """Parsed ground-truth document from a ``simulate`` result."""
    return json.loads(sim["truth"])


def load_bundle(bundle_json):
    return json.loads(bundle_json)


__all__ = [
    "DataError",
    "FdamonError",
    "MewmaChart",
    "NumericalError",
    "SplineBasis",
    "arl",
    "arl_monte_carlo",
    "calibrate_h4",
    "chi2_cdf",
    "chi2_quantile",
    "conditional_scores",
    "error_covariance",
    "estimate_baseline_cov",
    "fit",
    "hotelling_t2",
    "load_bundle",
    "load_truth",
    "run_chart",
    "score",
    "simulate",
]
