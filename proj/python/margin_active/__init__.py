"""Python access to the margin-active simulator.

Specs, learners and experiment configs are plain dicts with the same layout
as the JSON files read by the ``margin-active`` command.
"""

import json

from . import _core
from ._core import (
    BudgetError,
    ConfigError,
    UnsupportedSpecError,
    cell_at,
    eliminate,
    estimate_eta,
    fit_rate,
    likelihood_ratio,
    n_queries,
    np_label,
    sharp_margin,
    soft_margin,
)

__all__ = [
    "BudgetError",
    "ConfigError",
    "UnsupportedSpecError",
    "cell_at",
    "describe_spec",
    "eliminate",
    "estimate_eta",
    "eta",
    "fit_rate",
    "likelihood_ratio",
    "n_queries",
    "np_label",
    "run_learner",
    "sharp_margin",
    "simulate",
    "soft_margin",
    "theoretical_exponents",
    "verify_dist",
]


def describe_spec(spec):
    return json.loads(_core.describe_spec(json.dumps(spec)))


def eta(spec, x):
    return _core.eta(json.dumps(spec), list(x))


def run_learner(learner, spec, n, seed=0):
    """Run one learner with budget ``n`` and return its exact excess risk,
    queries used and per-cell labels."""
    return json.loads(_core.run_learner(json.dumps(learner), json.dumps(spec), int(n), int(seed)))


def simulate(config, seed=None, jobs=1):
    """Run an experiment config; returns ``{"csv": str, "fits": [...]}``."""
    if seed is None:
        seed = config.get("seed", 0)
    return json.loads(_core.simulate(json.dumps(config), int(seed), int(jobs)))


def verify_dist(config, seed=None):
    if seed is None:
        seed = config.get("seed", 0)
    return json.loads(_core.verify_dist(json.dumps(config), int(seed)))


def theoretical_exponents(alpha, beta, beta_sharp, dim):
    return json.loads(_core.theoretical_exponents(alpha, beta, beta_sharp, dim))
