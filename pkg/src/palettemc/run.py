"""Pipeline execution: stage-1 fits, store handling, stage-2 analysis.

This is the layer behind the CLI verbs. ``fit_models`` produces one palette
store per model (running a sampler or importing a stored chain), and
``run_config`` chains everything together and writes the report files.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import dataio, examples
from .config import RunConfig, config_to_dict, validate_config
from .errors import ValidationError
from .palette import Dataset, ModelSpec
from .postprocess import PosteriorReport, run_analysis
from .samplers import (HierarchicalLogisticConfig, ConjugateRegressionConfig,
                       SampleStore, build_psi_store, gibbs_linear_regression,
                       mh_logistic_hierarchical)


def build_dataset(config: RunConfig, base_dir=".") -> Dataset:
    """Resolve the config's data block into a dataset, applying the declared
    centering, standardization, and interaction columns."""
    block = config.data
    if block is None:
        raise ValidationError("config declares no data")
    if "example" in block:
        if block["example"] == "binomial":
            return examples.binomial_dataset()
        raise ValidationError(f"no embedded data for example {block['example']!r}")
    path = Path(block["path"])
    if not path.is_absolute():
        path = Path(base_dir) / path
    data = dataio.load_dataset_csv(
        path,
        response=block.get("response", "y"),
        covariates=block.get("covariates", ()),
        center=block.get("center", ()),
    )
    x = data.covariates
    for name in block.get("standardize", ()):
        names = list(block.get("covariates", ()))
        if name not in names:
            raise ValidationError(f"cannot standardize '{name}': not a covariate column")
        j = names.index(name)
        sd = x[:, j].std()
        if sd == 0:
            raise ValidationError(f"cannot standardize constant column '{name}'")
        x = x.copy()
        x[:, j] = (x[:, j] - x[:, j].mean()) / sd
    for pair in block.get("interactions", ()):
        a, b = (int(i) for i in pair)
        x = np.column_stack([x, x[:, a] * x[:, b]])
    return Dataset(data.responses, x)


def _fit_binomial(block, model: ModelSpec, data: Dataset, draws: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Direct conjugate sampling: each success-rate coordinate pools the
    records mapped to it."""
    prior = block.param_prior
    alpha = prior.get("alpha", 1.0)
    beta = prior.get("beta", 1.0)
    alpha = [alpha] * model.n_params if np.isscalar(alpha) else list(alpha)
    beta = [beta] * model.n_params if np.isscalar(beta) else list(beta)
    pmap = np.asarray(block.likelihood["param_map"], dtype=int)
    y = data.responses
    trials = data.covariates[:, 0]
    theta = np.empty((draws, model.n_params))
    for j in range(model.n_params):
        mask = pmap == j
        successes = float(y[mask].sum())
        total = float(trials[mask].sum())
        theta[:, j] = rng.beta(successes + alpha[j], total - successes + beta[j],
                               size=draws)
    return theta


def _regression_config(block) -> ConjugateRegressionConfig:
    prior = block.param_prior
    cov = prior["covariance"]
    cov = np.diag(np.asarray(cov, dtype=float)) if np.ndim(cov) == 1 \
        else np.asarray(cov, dtype=float)
    return ConjugateRegressionConfig(
        coef_prior_mean=np.asarray(prior["mean"], dtype=float),
        coef_prior_covariance=cov,
        variance_prior_shape=float(prior["shape"]),
        variance_prior_scale=float(prior["scale"]),
    )


def _logistic_config(config: RunConfig) -> HierarchicalLogisticConfig:
    designs = []
    multipliers = []
    for block in config.models:
        designs.append(tuple(block.likelihood.get("design_columns", ())))
        multipliers.append(float(block.param_prior["precision_multiplier"]))
    return HierarchicalLogisticConfig(
        design_columns=tuple(designs),
        precision_multipliers=tuple(multipliers),
        v_prior_shape=float(config.stage1.get("v_prior_shape", 3.29)),
        v_prior_rate=float(config.stage1.get("v_prior_rate", 7.80)),
        proposal_scale=float(config.stage1.get("proposal_scale", 0.2)),
    )


def fit_models(config: RunConfig, models, data: Dataset, base_dir=".",
               seed: int | None = None) -> list[SampleStore]:
    """Stage 1 for every model: run its sampler (or import its chain) and map
    the draws onto palette rows."""
    seed = config.seed if seed is None else seed
    seed_seq = np.random.SeedSequence(seed).spawn(len(models))
    iters = int(config.stage1["iterations"])
    burnin = int(config.stage1["burnin"])
    n_chains = int(config.stage1["chains"])
    stores = []
    for model, block, child in zip(models, config.models, seed_seq):
        rng = np.random.default_rng(child)
        if block.chain is not None:
            stores.append(_store_from_chain_file(block, model, base_dir, rng))
            continue
        family = block.likelihood.get("family")
        if family == "binomial":
            draws = (iters - burnin) * n_chains
            theta = _fit_binomial(block, model, data, draws, rng)
            hyper = None
        elif family == "gaussian_regression":
            cols = list(block.likelihood.get("design_columns", ()))
            view = Dataset(data.responses, data.covariates[:, cols])
            reg_config = _regression_config(block)
            pieces = [gibbs_linear_regression(view, reg_config, iters, burnin, rng)
                      for _ in range(n_chains)]
            theta = np.vstack([np.column_stack([c, s]) for c, s in pieces])
            hyper = None
        elif family == "logistic":
            log_config = _logistic_config(config)
            pieces = [mh_logistic_hierarchical(data, log_config, model, iters, burnin, rng)
                      for _ in range(n_chains)]
            theta = np.vstack([b for b, _ in pieces])
            hyper = np.concatenate([v for _, v in pieces])
        else:
            raise ValidationError(f"no stage-1 sampler for likelihood family {family!r}")
        stores.append(build_psi_store(model, theta, hyper, rng,
                                      burnin=burnin, seed=seed))
    return stores


def _store_from_chain_file(block, model: ModelSpec, base_dir,
                           rng: np.random.Generator) -> SampleStore:
    path = Path(block.chain["path"])
    if not path.is_absolute():
        path = Path(base_dir) / path
    kind = block.chain.get("kind", "theta")
    if kind == "theta":
        chain, hyper, _ = dataio.load_chain_csv(path, model.n_params)
        return build_psi_store(model, chain, hyper, rng)
    if kind == "psi":
        return dataio.load_store_csv(path, model.id, model.d)
    raise ValidationError(f"chain kind must be 'theta' or 'psi', got {kind!r}")


def write_stores(stores, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [dataio.write_store_csv(store, directory / f"store_model{store.model_id}.csv")
            for store in stores]


def load_stores(directory, models) -> list[SampleStore]:
    directory = Path(directory)
    stores = []
    for model in models:
        path = directory / f"store_model{model.id}.csv"
        if not path.exists():
            raise ValidationError(f"missing store file: {path}")
        stores.append(dataio.load_store_csv(path, model.id, model.d))
    return stores


def weigh(config: RunConfig, models, stores, data: Dataset, **overrides) -> PosteriorReport:
    """Stage 2 under the config's settings (keyword overrides win)."""
    stage2 = dict(config.stage2)
    stage2.update({k: v for k, v in overrides.items() if v is not None})
    return run_analysis(
        stores, models, data,
        method=str(stage2["method"]),
        iterations=int(stage2["iterations"]),
        chains=int(stage2["chains"]),
        burnin_fraction=float(stage2["burnin_fraction"]),
        draws_per_model=(None if stage2.get("draws_per_model") is None
                         else int(stage2["draws_per_model"])),
        seed=int(stage2.get("seed", config.seed)),
        tune=bool(stage2.get("tune_priors", False)),
        tune_rounds=int(stage2.get("tune_rounds", 8)),
        tune_iterations=int(stage2.get("tune_iterations", 10_000)),
    )


def run_config(config: RunConfig, base_dir=".", output_dir=None,
               write: bool = True) -> PosteriorReport:
    """Validate, fit every model, weigh them, and (optionally) write the
    report, its CSV companions, and the trace files."""
    from .config import build_model_set

    validate_config(config, base_dir)
    models = build_model_set(config)
    data = build_dataset(config, base_dir)
    stores = fit_models(config, models, data, base_dir)
    report = weigh(config, models, stores, data)
    if write:
        out = Path(output_dir if output_dir is not None else config.output_dir)
        if not out.is_absolute():
            out = Path(base_dir) / out
        dataio.emit_report(report, out, formats=("text", "csv", "json"),
                           config_echo=config_to_dict(config))
    return report


def _deep_merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def run_example(name: str, data_path=None, overrides: dict | None = None,
                output_dir=None, write: bool = True) -> PosteriorReport:
    """Run one of the built-in examples end to end.

    ``overrides`` is a partial config dict merged over the example defaults,
    e.g. ``{"stage2": {"iterations": 20000}}``.
    """
    from .config import config_from_dict, config_to_dict as to_dict

    config = examples.example_config(name, data_path)
    if overrides:
        config = config_from_dict(_deep_merge(to_dict(config), overrides))
    return run_config(config, output_dir=output_dir, write=write)
