"""Run configuration: a YAML document validated into model specs.

The schema is nested key/value sections. ``models`` is a list of model
blocks; ``data`` names either a CSV file with column roles or a built-in
example; ``stage1``/``stage2`` hold iteration counts. Prior weights that do
not sum to 1 are renormalized with a warning; everything else that is wrong
is rejected before any compute starts.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import families
from .errors import ValidationError
from .palette import LinearBijection, ModelSpec

STAGE1_DEFAULTS = {"iterations": 60_000, "burnin": 10_000, "chains": 3}
STAGE2_DEFAULTS = {
    "method": "both",
    "iterations": 100_000,
    "chains": 2,
    "burnin_fraction": 0.5,
    "draws_per_model": None,
    "tune_priors": False,
    "tune_rounds": 8,
    "tune_iterations": 10_000,
}

PARAM_PRIOR_FAMILIES = ("beta", "normal_inverse_gamma", "hierarchical_normal")
SUPPLEMENT_FAMILIES = ("none", "beta", "hierarchical_normal")
LIKELIHOOD_FAMILIES = ("binomial", "gaussian_regression", "logistic")


@dataclass(frozen=True)
class ModelConfig:
    name: str
    n_params: int
    prior_weight: float
    param_prior: dict
    likelihood: dict
    bijection: object = "identity"
    supplemental_prior: dict = field(default_factory=lambda: {"family": "none"})
    chain: dict | None = None


@dataclass(frozen=True)
class RunConfig:
    name: str
    palette_dim: int
    models: tuple[ModelConfig, ...]
    data: dict | None = None
    seed: int = 0
    stage1: dict = field(default_factory=dict)
    stage2: dict = field(default_factory=dict)
    output_dir: str = "out"


def config_from_dict(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise ValidationError("config must be a mapping")
    unknown = set(payload) - {"name", "palette_dim", "models", "data", "seed",
                              "stage1", "stage2", "output_dir"}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    try:
        models = tuple(
            ModelConfig(
                name=str(block["name"]),
                n_params=int(block["n_params"]),
                prior_weight=float(block["prior_weight"]),
                param_prior=dict(block["param_prior"]),
                likelihood=dict(block["likelihood"]),
                bijection=block.get("bijection", "identity"),
                supplemental_prior=dict(block.get("supplemental_prior", {"family": "none"})),
                chain=None if block.get("chain") is None else dict(block["chain"]),
            )
            for block in payload["models"]
        )
    except KeyError as exc:
        raise ValidationError(f"model block is missing required key {exc}") from None
    stage1 = dict(STAGE1_DEFAULTS)
    stage1.update(payload.get("stage1") or {})
    stage2 = dict(STAGE2_DEFAULTS)
    stage2.update(payload.get("stage2") or {})
    return RunConfig(
        name=str(payload.get("name", "run")),
        palette_dim=int(payload["palette_dim"]),
        models=models,
        data=None if payload.get("data") is None else dict(payload["data"]),
        seed=int(payload.get("seed", 0)),
        stage1=stage1,
        stage2=stage2,
        output_dir=str(payload.get("output_dir", "out")),
    )


def config_to_dict(config: RunConfig) -> dict:
    return {
        "name": config.name,
        "palette_dim": config.palette_dim,
        "models": [
            {
                "name": m.name,
                "n_params": m.n_params,
                "prior_weight": m.prior_weight,
                "param_prior": m.param_prior,
                "likelihood": m.likelihood,
                "bijection": m.bijection,
                "supplemental_prior": m.supplemental_prior,
                "chain": m.chain,
            }
            for m in config.models
        ],
        "data": config.data,
        "seed": config.seed,
        "stage1": config.stage1,
        "stage2": config.stage2,
        "output_dir": config.output_dir,
    }


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    payload = yaml.safe_load(path.read_text(encoding="utf-8"))
    return config_from_dict(payload)


def save_config(config: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(config_to_dict(config), sort_keys=True),
                    encoding="utf-8")
    return path


def _bijection_from_config(spec, d: int) -> LinearBijection:
    if isinstance(spec, str):
        if spec == "identity":
            return LinearBijection.identity(d)
        raise ValidationError(f"unknown bijection keyword: {spec!r}")
    if isinstance(spec, dict) and "permutation" in spec:
        order = list(spec["permutation"])
        if len(order) != d:
            raise ValidationError(f"permutation must have {d} entries")
        return LinearBijection.permutation(order)
    matrix = np.asarray(spec, dtype=float)
    if matrix.shape != (d, d):
        raise ValidationError(f"bijection matrix must be {d}x{d}, got shape {matrix.shape}")
    return LinearBijection(matrix)


def _param_prior_from_config(spec: dict, n_params: int):
    family = spec.get("family")
    if family == "beta":
        alpha = spec.get("alpha", 1.0)
        beta = spec.get("beta", 1.0)
        alpha = [alpha] * n_params if np.isscalar(alpha) else list(alpha)
        beta = [beta] * n_params if np.isscalar(beta) else list(beta)
        if len(alpha) != n_params or len(beta) != n_params:
            raise ValidationError("beta prior parameters must cover every coordinate")
        return families.beta_prior(alpha, beta)
    if family == "normal_inverse_gamma":
        mean = np.asarray(spec["mean"], dtype=float)
        cov = spec["covariance"]
        cov = np.diag(np.asarray(cov, dtype=float)) if np.ndim(cov) == 1 \
            else np.asarray(cov, dtype=float)
        if mean.size != n_params - 1:
            raise ValidationError(
                "normal_inverse_gamma covers the coefficients plus a trailing "
                f"variance: mean needs {n_params - 1} entries"
            )
        return families.normal_inverse_gamma_prior(
            mean, cov, float(spec["shape"]), float(spec["scale"]))
    if family == "hierarchical_normal":
        return families.hierarchical_normal_prior(float(spec["precision_multiplier"]))
    raise ValidationError(
        f"unknown param prior family {family!r}; expected one of {PARAM_PRIOR_FAMILIES}")


def _supplement_from_config(spec: dict, dim: int):
    family = spec.get("family", "none")
    if family == "none":
        if dim != 0:
            raise ValidationError(
                f"model needs a supplemental prior for its {dim} padding coordinates")
        return families.no_supplement()
    if dim == 0:
        raise ValidationError("model has no padding coordinates, use family 'none'")
    if family == "beta":
        return families.beta_supplement(dim, float(spec.get("alpha", 1.0)),
                                        float(spec.get("beta", 1.0)))
    if family == "hierarchical_normal":
        return families.normal_supplement(dim, float(spec["precision_multiplier"]))
    raise ValidationError(
        f"unknown supplemental family {family!r}; expected one of {SUPPLEMENT_FAMILIES}")


def _likelihood_from_config(spec: dict):
    family = spec.get("family")
    if family == "binomial":
        return families.binomial_loglik(list(spec["param_map"]))
    if family == "gaussian_regression":
        return families.gaussian_regression_loglik(list(spec.get("design_columns", [])))
    if family == "logistic":
        return families.logistic_loglik(list(spec.get("design_columns", [])))
    raise ValidationError(
        f"unknown likelihood family {family!r}; expected one of {LIKELIHOOD_FAMILIES}")


def build_model_set(config: RunConfig) -> list[ModelSpec]:
    """Turn the config's model blocks into validated model specs.

    Prior weights are renormalized (with a warning) when they do not already
    sum to 1.
    """
    if not config.models:
        raise ValidationError("config defines no models")
    d = config.palette_dim
    if d < 1:
        raise ValidationError("palette dimension must be positive")
    weights = np.array([m.prior_weight for m in config.models], dtype=float)
    if np.any(weights <= 0):
        raise ValidationError("prior weights must be positive")
    if abs(float(weights.sum()) - 1.0) > 1e-12:
        warnings.warn(
            f"prior weights sum to {weights.sum():.6g}; renormalizing",
            RuntimeWarning, stacklevel=2)
        weights = weights / weights.sum()
    specs = []
    for i, block in enumerate(config.models, start=1):
        if not 1 <= block.n_params <= d:
            raise ValidationError(
                f"model '{block.name}': n_params must lie in 1..{d}")
        specs.append(ModelSpec(
            id=i,
            name=block.name,
            n_params=block.n_params,
            bijection=_bijection_from_config(block.bijection, d),
            param_prior=_param_prior_from_config(block.param_prior, block.n_params),
            supplemental_prior=_supplement_from_config(
                block.supplemental_prior, d - block.n_params),
            log_likelihood=_likelihood_from_config(block.likelihood),
            prior_weight=float(weights[i - 1]),
        ))
    return specs


def validate_config(config: RunConfig, base_dir=".") -> RunConfig:
    """Full up-front validation; returns the config (unchanged apart from
    defaults already applied at parse time)."""
    build_model_set(config)
    method = str(config.stage2.get("method", "both"))
    if method not in {"1", "2", "both"}:
        raise ValidationError("stage2.method must be one of '1', '2', 'both'")
    for key in ("iterations", "chains"):
        if int(config.stage2[key]) < 1:
            raise ValidationError(f"stage2.{key} must be positive")
    if not 0.0 <= float(config.stage2["burnin_fraction"]) < 1.0:
        raise ValidationError("stage2.burnin_fraction must lie in [0, 1)")
    if int(config.stage1["iterations"]) <= int(config.stage1["burnin"]):
        raise ValidationError("stage1.iterations must exceed stage1.burnin")
    if int(config.stage1["chains"]) < 1:
        raise ValidationError("stage1.chains must be positive")
    base = Path(base_dir)
    if config.data is not None and "path" in config.data:
        path = Path(config.data["path"])
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ValidationError(f"data file not found: {path}")
    for block in config.models:
        if block.chain is not None:
            path = Path(block.chain["path"])
            if not path.is_absolute():
                path = base / path
            if not path.exists():
                raise ValidationError(f"chain file not found: {path}")
    return config
