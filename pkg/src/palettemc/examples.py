"""Built-in example analyses.

``binomial`` is fully self-contained. ``pine`` (two Gaussian regressions for
board compressive strength against two density measurements) and ``trout``
(five logistic regressions for return rates against sex and length) need a
user-supplied CSV, for which the required schema is spelled out in the error
raised when the file is missing.
"""
from __future__ import annotations

from .config import RunConfig, config_from_dict
from .errors import ValidationError
from .palette import Dataset

EXAMPLE_NAMES = ("binomial", "pine", "trout")

BINOMIAL_SUCCESSES = (8.0, 16.0)
BINOMIAL_TRIALS = (20.0, 30.0)


def binomial_dataset() -> Dataset:
    """Two binomial records: successes out of trials."""
    return Dataset(list(BINOMIAL_SUCCESSES), [[t] for t in BINOMIAL_TRIALS])


def binomial_config() -> RunConfig:
    """Two models for two binomial counts: separate success rates against one
    shared rate reached through an averaging bijection (Jacobian 1/2)."""
    return config_from_dict({
        "name": "binomial",
        "palette_dim": 2,
        "seed": 20260809,
        "data": {"example": "binomial"},
        "models": [
            {
                "name": "separate-rates",
                "n_params": 2,
                "prior_weight": 0.5,
                "bijection": "identity",
                "param_prior": {"family": "beta", "alpha": [1.0, 1.0], "beta": [1.0, 1.0]},
                "supplemental_prior": {"family": "none"},
                "likelihood": {"family": "binomial", "param_map": [0, 1]},
            },
            {
                "name": "common-rate",
                "n_params": 1,
                "prior_weight": 0.5,
                "bijection": [[0.5, 0.5], [0.0, 1.0]],
                "param_prior": {"family": "beta", "alpha": [1.0], "beta": [1.0]},
                "supplemental_prior": {"family": "beta", "alpha": 15.0, "beta": 15.0},
                "likelihood": {"family": "binomial", "param_map": [0, 0]},
            },
        ],
        "stage1": {"iterations": 100_000, "burnin": 0, "chains": 1},
        "stage2": {"method": "both", "iterations": 100_000, "chains": 2,
                   "burnin_fraction": 0.5, "draws_per_model": 100_000},
        "output_dir": "out/binomial",
    })


PINE_SCHEMA = ("CSV with header and 42 rows: column 'y' (maximum compressive "
               "strength), 'x' (density), 'z' (resin-adjusted density); x and "
               "z are mean-centered at load")


def pine_config(data_path=None) -> RunConfig:
    """Two Gaussian regressions sharing a palette of (intercept, slope,
    variance); identical priors, so model moves ride on the likelihoods."""
    if data_path is None:
        raise ValidationError(
            f"the pine example needs a data file: supply a {PINE_SCHEMA}")
    prior = {
        "family": "normal_inverse_gamma",
        "mean": [3000.0, 185.0],
        "covariance": [1.0e6, 1.0e4],
        "shape": 3.0,
        "scale": 180_000.0,
    }
    return config_from_dict({
        "name": "pine",
        "palette_dim": 3,
        "seed": 20260809,
        "data": {
            "path": str(data_path),
            "response": "y",
            "covariates": ["x", "z"],
            "center": ["x", "z"],
        },
        "models": [
            {
                "name": "density",
                "n_params": 3,
                "prior_weight": 0.9995,
                "bijection": "identity",
                "param_prior": dict(prior),
                "supplemental_prior": {"family": "none"},
                "likelihood": {"family": "gaussian_regression", "design_columns": [0]},
            },
            {
                "name": "adjusted-density",
                "n_params": 3,
                "prior_weight": 0.0005,
                "bijection": "identity",
                "param_prior": dict(prior),
                "supplemental_prior": {"family": "none"},
                "likelihood": {"family": "gaussian_regression", "design_columns": [1]},
            },
        ],
        "stage1": {"iterations": 60_000, "burnin": 10_000, "chains": 3},
        "stage2": {"method": "both", "iterations": 200_000, "chains": 2,
                   "burnin_fraction": 0.5, "draws_per_model": 200_000},
        "output_dir": "out/pine",
    })


TROUT_SCHEMA = ("CSV with header: column 'y' (0/1 return indicator), 'S' (sex "
                "code), 'L' (length); S and L are standardized at load and an "
                "S*L interaction column is added")

TROUT_DESIGNS = ((), (0,), (1,), (0, 1), (0, 1, 2))
TROUT_MULTIPLIERS = (1, 2, 2, 3, 4)
TROUT_PERMUTATIONS = ([0, 1, 2, 3], [0, 1, 2, 3], [0, 2, 1, 3], [0, 1, 2, 3],
                      [0, 1, 2, 3])
TROUT_NAMES = ("intercept", "sex", "length", "sex+length", "sex*length")


def trout_config(data_path=None) -> RunConfig:
    """Five nested logistic regressions on a four-coordinate palette.

    Coefficients and padding coordinates alike get N(0, 1/(n_k V)) priors
    under one shared precision V ~ Ga(3.29, 7.80), chosen so the implied
    success probability is nearly uniform; every map is a coordinate
    permutation.
    """
    if data_path is None:
        raise ValidationError(
            f"the trout example needs a data file: supply a {TROUT_SCHEMA}")
    models = []
    for k in range(5):
        n_params = len(TROUT_DESIGNS[k]) + 1
        block = {
            "name": TROUT_NAMES[k],
            "n_params": n_params,
            "prior_weight": 0.2,
            "bijection": {"permutation": TROUT_PERMUTATIONS[k]},
            "param_prior": {"family": "hierarchical_normal",
                            "precision_multiplier": TROUT_MULTIPLIERS[k]},
            "likelihood": {"family": "logistic",
                           "design_columns": list(TROUT_DESIGNS[k])},
        }
        if n_params < 4:
            block["supplemental_prior"] = {
                "family": "hierarchical_normal",
                "precision_multiplier": TROUT_MULTIPLIERS[k],
            }
        else:
            block["supplemental_prior"] = {"family": "none"}
        models.append(block)
    return config_from_dict({
        "name": "trout",
        "palette_dim": 4,
        "seed": 20260809,
        "data": {
            "path": str(data_path),
            "response": "y",
            "covariates": ["S", "L"],
            "standardize": ["S", "L"],
            "interactions": [[0, 1]],
        },
        "models": models,
        "stage1": {"iterations": 500_000, "burnin": 50_000, "chains": 3,
                   "proposal_scale": 0.2, "v_prior_shape": 3.29,
                   "v_prior_rate": 7.80},
        "stage2": {"method": "both", "iterations": 200_000, "chains": 5,
                   "burnin_fraction": 0.5, "draws_per_model": 10_000,
                   "tune_priors": True},
        "output_dir": "out/trout",
    })


def example_config(name: str, data_path=None) -> RunConfig:
    if name == "binomial":
        return binomial_config()
    if name == "pine":
        return pine_config(data_path)
    if name == "trout":
        return trout_config(data_path)
    raise ValidationError(f"unknown example {name!r}; expected one of {EXAMPLE_NAMES}")
