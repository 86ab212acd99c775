"""Model-weight estimation from stored per-model palette samples.

Two estimators are provided. The indicator-chain estimator alternates a
uniform draw from the current model's store with a categorical draw of the
next model; it yields visit frequencies and their Rao-Blackwellized
refinement, the chain mean of the categorical probabilities themselves. The
transition estimator skips the chain: it averages the categorical
probabilities over each model's store to build a stochastic matrix of
between-model moves whose stationary distribution is the vector of model
weights.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, ReducibleChainError, ValidationError
from .palette import (Dataset, model_log_posterior_kernels_rows,
                      probs_from_log_weights, validate_model_set)
from .samplers import SampleStore

Array = np.ndarray

DEFAULT_BATCHES = 20


@dataclass(frozen=True)
class TransitionEstimate:
    """Averaged between-model transition probabilities.

    ``matrix[h, k]`` is the mean probability of moving to model k when the
    palette is drawn from model h's store; ``counts[h]`` is the number of
    draws averaged into row h.
    """

    matrix: Array
    counts: Array

    def __post_init__(self):
        p = np.asarray(self.matrix, dtype=float)
        c = np.asarray(self.counts, dtype=int)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValidationError(f"transition matrix must be square, got shape {p.shape}")
        if c.shape != (p.shape[0],):
            raise ValidationError("one draw count per row is required")
        if np.any(c < 1):
            raise ValidationError("every row needs at least one averaged draw")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValidationError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-10:
            raise ValidationError("transition rows must sum to 1 within 1e-10")
        object.__setattr__(self, "matrix", p)
        object.__setattr__(self, "counts", c)

    @property
    def k(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PosteriorReport:
    """Everything a stage-2 run produced.

    Probabilities are reported under ``prior_weights_used``; when prior tuning
    was active the chains actually ran under ``sampling_weights`` and the
    estimates were converted back through the evidence-ratio identity, while
    ``visit_frequencies`` and ``transition`` keep the raw sampling-weight
    scale. ``cumulative_trace`` stacks the per-chain running means of the
    categorical probabilities, shape (chains, iterations, K).
    """

    model_names: tuple[str, ...]
    prior_weights_used: Array
    sampling_weights: Array
    probs_indicator: Array | None = None
    probs_rao_blackwell: Array | None = None
    probs_stationary: Array | None = None
    bayes_factors: Array | None = None
    transition: TransitionEstimate | None = None
    mc_standard_errors: dict = field(default_factory=dict)
    cumulative_trace: Array | None = None
    visit_frequencies: Array | None = None
    seed: int | None = None
    iterations: int = 0
    chains: int = 0
    burnin_iterations: int = 0
    draws_per_model: int | None = None
    diagnostics: tuple[str, ...] = ()

    def __post_init__(self):
        k = len(self.model_names)
        for name in ("prior_weights_used", "sampling_weights", "probs_indicator",
                     "probs_rao_blackwell", "probs_stationary"):
            value = getattr(self, name)
            if value is None:
                continue
            simplex = np.asarray(value, dtype=float)
            if simplex.shape != (k,):
                raise ValidationError(f"{name} must have one entry per model")
            if np.any(simplex < 0.0) or abs(float(simplex.sum()) - 1.0) > 1e-10:
                raise ValidationError(f"{name} must sum to 1 within 1e-10")
            object.__setattr__(self, name, simplex)
        if self.bayes_factors is not None:
            bf = np.asarray(self.bayes_factors, dtype=float)
            if bf.shape != (k, k):
                raise ValidationError("bayes_factors must be K x K")
            if np.max(np.abs(bf * bf.T - 1.0)) > 1e-9 or np.max(np.abs(np.diag(bf) - 1.0)) > 1e-9:
                raise ValidationError("bayes_factors must satisfy reciprocity with unit diagonal")
            object.__setattr__(self, "bayes_factors", bf)


# ---------------------------------------------------------------------------
# shared machinery


def _check_stores(stores, models) -> list[SampleStore]:
    stores = list(stores)
    if len(stores) != len(models):
        raise ValidationError(f"{len(models)} models but {len(stores)} stores")
    for model, store in zip(models, stores):
        if store.model_id != model.id:
            raise ValidationError(
                f"store for model {store.model_id} paired with model {model.id}"
            )
        if store.d != model.d:
            raise ValidationError(
                f"store for model {model.id} has {store.d} palette columns, expected {model.d}"
            )
    return stores


def _normalized_weights(models) -> Array:
    w = np.array([model.prior_weight for model in models], dtype=float)
    return w / w.sum()


def _kernel_tables(stores, models, data) -> list[Array]:
    """Per-store matrices of per-model log likelihood-times-prior values."""
    return [
        model_log_posterior_kernels_rows(store.psi_draws, models, data, store.hyper_draws)
        for store in stores
    ]


def _prob_tables(kernels, weights) -> list[Array]:
    logw = np.log(np.asarray(weights, dtype=float))
    return [probs_from_log_weights(kernel + logw) for kernel in kernels]


def _chain_core(tables, iterations, initial_state, rng) -> tuple[Array, Array]:
    """Run the model-indicator chain over precomputed probability tables.

    Returns the visited state per iteration and the categorical probability
    row evaluated there.
    """
    k = tables[0].shape[1]
    cums = [np.cumsum(t, axis=1) for t in tables]
    sizes = [t.shape[0] for t in tables]
    visits = np.empty(iterations, dtype=np.intp)
    pis = np.empty((iterations, k))
    state = initial_state
    for j in range(iterations):
        i = int(rng.integers(sizes[state]))
        pis[j] = tables[state][i]
        visits[j] = state
        u = rng.random()
        state = min(int(np.searchsorted(cums[state][i], u, side="right")), k - 1)
    return visits, pis


def _batch_means_se(series, n_batches: int = DEFAULT_BATCHES) -> Array:
    """Batch-means standard error per column of an (n, K) series."""
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    batches = min(n_batches, n)
    if batches < 2:
        return np.full(series.shape[1], np.nan)
    width = n // batches
    means = series[: batches * width].reshape(batches, width, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(batches)


def _split_burnin(iterations: int, burnin_fraction: float) -> int:
    if not 0.0 <= burnin_fraction < 1.0:
        raise ValidationError("burn-in fraction must lie in [0, 1)")
    n_burn = int(iterations * burnin_fraction)
    if iterations - n_burn < 1:
        raise ValidationError("no post-burn-in iterations")
    return n_burn


def _reweight_with_se(probs, se, old_prior, new_prior):
    """Reweight an estimated simplex and, approximately, its standard errors."""
    ratio = np.asarray(new_prior, dtype=float) / np.asarray(old_prior, dtype=float)
    scaled = probs * ratio
    total = scaled.sum()
    new_probs = scaled / total
    # diagonal delta-method term: d new_k / d p_k = (ratio_k / total) (1 - new_k)
    new_se = se * (ratio / total) * (1.0 - new_probs)
    return new_probs, new_se


# ---------------------------------------------------------------------------
# method 1: indicator chain


def method1_chain(stores, models, data: Dataset, iterations: int,
                  initial_model: int, rng: np.random.Generator, *,
                  burnin_fraction: float = 0.5) -> PosteriorReport:
    """One model-indicator chain over the stored palette samples.

    Each step draws a palette row uniformly from the current model's store,
    evaluates the categorical full conditional there, and draws the next model
    from it. The first ``burnin_fraction`` of the chain is discarded before
    averaging.
    """
    models = validate_model_set(models)
    stores = _check_stores(stores, models)
    if iterations < 1:
        raise ValidationError("need at least one iteration")
    if not 1 <= initial_model <= len(models):
        raise ValidationError(f"initial model must lie in 1..{len(models)}")
    n_burn = _split_burnin(iterations, burnin_fraction)
    weights = _normalized_weights(models)
    tables = _prob_tables(_kernel_tables(stores, models, data), weights)
    visits, pis = _chain_core(tables, iterations, initial_model - 1, rng)
    return _assemble_method1_report(models, weights, weights, [visits], [pis],
                                    n_burn, seed=None)


def _assemble_method1_report(models, prior_weights, sampling_weights,
                             visits_list, pis_list, n_burn, seed,
                             extra_diagnostics=()) -> PosteriorReport:
    k = len(models)
    iterations = pis_list[0].shape[0]
    chains = len(pis_list)

    indicator_means = []
    rb_means = []
    se_ind_sq = np.zeros(k)
    se_rb_sq = np.zeros(k)
    for visits, pis in zip(visits_list, pis_list):
        tail_visits = visits[n_burn:]
        tail_pis = pis[n_burn:]
        one_hot = np.zeros((tail_visits.size, k))
        one_hot[np.arange(tail_visits.size), tail_visits] = 1.0
        indicator_means.append(one_hot.mean(axis=0))
        rb_means.append(tail_pis.mean(axis=0))
        se_ind_sq += _batch_means_se(one_hot) ** 2
        se_rb_sq += _batch_means_se(tail_pis) ** 2
    probs_indicator = np.mean(indicator_means, axis=0)
    probs_rb = np.mean(rb_means, axis=0)
    se_indicator = np.sqrt(se_ind_sq) / chains
    se_rb = np.sqrt(se_rb_sq) / chains

    diagnostics = list(extra_diagnostics)
    for idx in np.flatnonzero(probs_indicator == 0.0):
        diagnostics.append(
            f"model {idx + 1} ({models[idx].name}) never visited after burn-in"
        )

    visit_frequencies = probs_indicator.copy()
    if not np.allclose(sampling_weights, prior_weights, rtol=0, atol=1e-15):
        keep = probs_indicator > 0
        if np.all(keep):
            probs_indicator, se_indicator = _reweight_with_se(
                probs_indicator, se_indicator, sampling_weights, prior_weights)
        probs_rb, se_rb = _reweight_with_se(probs_rb, se_rb,
                                            sampling_weights, prior_weights)

    bayes_factors = None
    if np.all(probs_rb > 0.0):
        bayes_factors = bayes_factor_matrix(probs_rb, prior_weights)
    else:
        diagnostics.append("Bayes factors unavailable: a model has zero estimated probability")

    trace = np.stack([
        np.cumsum(pis, axis=0) / np.arange(1, iterations + 1)[:, None]
        for pis in pis_list
    ])
    return PosteriorReport(
        model_names=tuple(m.name for m in models),
        prior_weights_used=prior_weights,
        sampling_weights=sampling_weights,
        probs_indicator=probs_indicator / probs_indicator.sum(),
        probs_rao_blackwell=probs_rb / probs_rb.sum(),
        bayes_factors=bayes_factors,
        mc_standard_errors={"indicator": se_indicator, "rao_blackwell": se_rb},
        cumulative_trace=trace,
        visit_frequencies=visit_frequencies,
        seed=seed,
        iterations=iterations,
        chains=chains,
        burnin_iterations=n_burn,
        diagnostics=tuple(diagnostics),
    )


# ---------------------------------------------------------------------------
# method 2: averaged transition matrix


def _fsum_columns(rows: Array) -> Array:
    """Exactly rounded column sums, insensitive to accumulation order."""
    return np.array([math.fsum(rows[:, k]) for k in range(rows.shape[1])])


def _method2_average(tables, draws_per_model, rng, n_batches=DEFAULT_BATCHES):
    """Average full-conditional rows per store, plus the same draws split into
    contiguous batches for standard-error estimation."""
    full_rows = []
    batch_rows = []
    batches = min(n_batches, draws_per_model)
    width = draws_per_model // batches if batches else 0
    for table in tables:
        idx = rng.integers(table.shape[0], size=draws_per_model)
        selected = table[idx]
        row = _fsum_columns(selected) / draws_per_model
        full_rows.append(row / row.sum())
        if batches >= 2 and width >= 1:
            trimmed = selected[: batches * width].reshape(batches, width, -1)
            means = trimmed.mean(axis=1)
            batch_rows.append(means / means.sum(axis=1, keepdims=True))
    matrix = np.vstack(full_rows)
    batch_matrices = None
    if batch_rows:
        # batch b's matrix stacks batch b of every store row
        batch_matrices = np.stack(batch_rows, axis=1)
    return matrix, batch_matrices


def method2_transition(stores, models, data: Dataset, draws_per_model: int,
                       rng: np.random.Generator) -> TransitionEstimate:
    """Average the categorical full conditional over each model's store.

    Row h is the mean probability vector over ``draws_per_model`` palette rows
    resampled (with replacement) from store h; rows are renormalized only to
    absorb float rounding. Draws are streamed in batches, so the store size,
    not the draw count, bounds memory.
    """
    models = validate_model_set(models)
    stores = _check_stores(stores, models)
    if draws_per_model < 1:
        raise ValidationError("need at least one draw per model")
    weights = _normalized_weights(models)
    tables = _prob_tables(_kernel_tables(stores, models, data), weights)
    matrix, _ = _method2_average(tables, draws_per_model, rng)
    return TransitionEstimate(matrix, np.full(len(models), draws_per_model))


def _stationary_batch_se(batch_matrices) -> Array | None:
    """Standard error of the stationary probabilities from per-batch
    transition matrices (shape (batches, K, K))."""
    if batch_matrices is None:
        return None
    pis = []
    for matrix in batch_matrices:
        try:
            pis.append(stationary_distribution(matrix, row_sum_tol=1e-6))
        except (DegeneracyError, ValidationError):
            continue
    if len(pis) < 2:
        return None
    pis = np.vstack(pis)
    return pis.std(axis=0, ddof=1) / math.sqrt(len(pis))


# ---------------------------------------------------------------------------
# stationary distribution


def _is_irreducible(P: Array) -> bool:
    k = P.shape[0]
    reach = (P > 0.0).astype(int) + np.eye(k, dtype=int)
    for _ in range(max(1, int(np.ceil(np.log2(k))) + 1)):
        reach = (reach @ reach > 0).astype(int)
    return bool(np.all(reach > 0))


def stationary_distribution(matrix, *, row_sum_tol: float = 1e-3) -> Array:
    """Stationary distribution pi of a row-stochastic matrix, pi @ P = pi.

    Solves the singular system directly with the normalization constraint
    appended, which is exact for the small matrices produced here. Rows are
    renormalized first to absorb rounding (published matrices are often quoted
    to four decimals); anything off by more than ``row_sum_tol`` is rejected,
    as is a matrix whose states do not all communicate.
    """
    P = np.asarray(matrix, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError(f"transition matrix must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValidationError("transition matrix contains non-finite entries")
    if np.any(P < -1e-12):
        raise ValidationError("transition matrix has negative entries")
    sums = P.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > row_sum_tol:
        raise ValidationError(
            f"rows must sum to 1 within {row_sum_tol}, worst deviation "
            f"{np.max(np.abs(sums - 1.0)):.3g}"
        )
    P = np.clip(P, 0.0, None)
    P = P / P.sum(axis=1, keepdims=True)
    if not _is_irreducible(P):
        raise ReducibleChainError("no unique stationary distribution: chain is reducible")
    k = P.shape[0]
    system = P.T - np.eye(k)
    system[-1, :] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise ReducibleChainError("no unique stationary distribution") from exc
    if np.any(pi < -1e-10):
        raise DegeneracyError("stationary solve produced negative probabilities")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ P - pi)))
    if residual >= 1e-10:
        raise DegeneracyError(f"stationary residual {residual:.3g} exceeds 1e-10")
    return pi


# ---------------------------------------------------------------------------
# evidence ratios and prior changes


def bayes_factor_matrix(posterior_probs, prior_probs) -> Array:
    """Pairwise evidence ratios: entry (j, k) is the posterior odds of model j
    over model k divided by the matching prior odds."""
    p = np.asarray(posterior_probs, dtype=float)
    q = np.asarray(prior_probs, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValidationError("posterior and prior vectors must match")
    if np.any(p <= 0.0):
        raise ValidationError(
            "zero posterior probability: model never visited; increase "
            "iterations or tune the model priors"
        )
    if np.any(q <= 0.0):
        raise ValidationError("prior model probabilities must be positive")
    r = p / q
    bf = np.outer(r, 1.0 / r)
    np.fill_diagonal(bf, 1.0)
    return bf


def reweight_under_prior(probs, old_prior, new_prior) -> Array:
    """Re-express posterior model probabilities under a different model prior."""
    p = np.asarray(probs, dtype=float)
    old = np.asarray(old_prior, dtype=float)
    new = np.asarray(new_prior, dtype=float)
    if p.shape != old.shape or p.shape != new.shape:
        raise ValidationError("probability vectors must have matching shapes")
    if np.any(p <= 0.0) or np.any(old <= 0.0) or np.any(new <= 0.0):
        raise ValidationError("reweighting requires strictly positive entries")
    w = p * new / old
    return w / w.sum()


# ---------------------------------------------------------------------------
# prior tuning


def tune_model_priors(stores, models, data: Dataset, target, rounds: int,
                      iters_per_round: int, rng: np.random.Generator, *,
                      tolerance: float = 0.1, max_log_step: float = 5.0) -> Array:
    """Find sampling weights under which the indicator chain visits each model
    at roughly the target rate.

    Each round runs a short chain under the current weights; if the visit
    frequencies land within ``tolerance`` of the target the weights are
    returned, otherwise the log weights move by the log shortfall, clamped to
    ``max_log_step`` so a never-visited model cannot blow the update up.
    Issues a RuntimeWarning when the round budget runs out.
    """
    models = validate_model_set(models)
    stores = _check_stores(stores, models)
    target = np.asarray(target, dtype=float)
    k = len(models)
    if target.shape != (k,) or np.any(target <= 0) or abs(target.sum() - 1.0) > 1e-8:
        raise ValidationError("target must be a strictly positive simplex over the models")
    if rounds < 1:
        raise ValidationError("need at least one tuning round")
    kernels = _kernel_tables(stores, models, data)
    weights = _normalized_weights(models)
    n_burn = _split_burnin(iters_per_round, 0.5)
    for rnd in range(rounds):
        tables = _prob_tables(kernels, weights)
        visits, pis = _chain_core(tables, iters_per_round, rnd % k, rng)
        freqs = np.bincount(visits[n_burn:], minlength=k) / (iters_per_round - n_burn)
        if np.max(np.abs(freqs - target)) <= tolerance:
            return weights
        estimate = pis[n_burn:].mean(axis=0)
        with np.errstate(divide="ignore"):
            step = np.clip(np.log(target) - np.log(estimate), -max_log_step, max_log_step)
        logw = np.log(weights) + step
        weights = np.exp(logw - logw.max())
        weights /= weights.sum()
    warnings.warn("prior tuning stopped before reaching the target visit rates",
                  RuntimeWarning, stacklevel=2)
    return weights


# ---------------------------------------------------------------------------
# orchestration


def run_analysis(stores, models, data: Dataset, *, method: str = "both",
                 iterations: int = 100_000, chains: int = 2,
                 burnin_fraction: float = 0.5, draws_per_model: int | None = None,
                 seed: int = 0, tune: bool = False, tune_target=None,
                 tune_rounds: int = 8, tune_iterations: int = 10_000) -> PosteriorReport:
    """Full stage-2 run: optional prior tuning, replicate indicator chains
    started from distinct models, transition averaging, one combined report.

    Estimates are reported under the models' own prior weights; with
    ``tune=True`` the chains run under tuned weights and the estimates are
    converted back afterwards.
    """
    method = str(method)
    if method not in {"1", "2", "both"}:
        raise ValidationError("method must be one of '1', '2', 'both'")
    models = validate_model_set(models)
    stores = _check_stores(stores, models)
    if chains < 1:
        raise ValidationError("need at least one chain")
    k = len(models)
    seeds = np.random.SeedSequence(seed).spawn(chains + 2)
    prior_weights = _normalized_weights(models)
    diagnostics: list[str] = []

    kernels = _kernel_tables(stores, models, data)
    sampling_weights = prior_weights
    if tune:
        target = np.full(k, 1.0 / k) if tune_target is None else np.asarray(tune_target, float)
        sampling_weights = tune_model_priors(
            stores, models, data, target, tune_rounds, tune_iterations,
            np.random.default_rng(seeds[0]))
        diagnostics.append(
            "sampling weights tuned to target visit rates: "
            + ", ".join(f"{w:.6g}" for w in sampling_weights)
        )
    tables = _prob_tables(kernels, sampling_weights)

    report_m1 = None
    if method in {"1", "both"}:
        n_burn = _split_burnin(iterations, burnin_fraction)
        visits_list, pis_list = [], []
        for c in range(chains):
            rng = np.random.default_rng(seeds[1 + c])
            visits, pis = _chain_core(tables, iterations, c % k, rng)
            visits_list.append(visits)
            pis_list.append(pis)
        report_m1 = _assemble_method1_report(
            models, prior_weights, sampling_weights, visits_list, pis_list,
            n_burn, seed, extra_diagnostics=diagnostics)
        diagnostics = list(report_m1.diagnostics)

    transition = None
    probs_stationary = None
    se_stationary = None
    if method in {"2", "both"}:
        draws = iterations if draws_per_model is None else int(draws_per_model)
        if draws < 1:
            raise ValidationError("need at least one draw per model")
        rng2 = np.random.default_rng(seeds[-1])
        matrix, batch_matrices = _method2_average(tables, draws, rng2)
        transition = TransitionEstimate(matrix, np.full(k, draws))
        probs_stationary = stationary_distribution(matrix, row_sum_tol=1e-6)
        se_stationary = _stationary_batch_se(batch_matrices)
        if not np.allclose(sampling_weights, prior_weights, rtol=0, atol=1e-15):
            if se_stationary is None:
                se_stationary = np.full(k, np.nan)
            probs_stationary, se_stationary = _reweight_with_se(
                probs_stationary, se_stationary, sampling_weights, prior_weights)
            probs_stationary = probs_stationary / probs_stationary.sum()

    mc_ses = dict(report_m1.mc_standard_errors) if report_m1 else {}
    if se_stationary is not None:
        mc_ses["stationary"] = se_stationary

    probs_rb = report_m1.probs_rao_blackwell if report_m1 else None
    base_probs = probs_rb if probs_rb is not None else probs_stationary
    bayes_factors = None
    if base_probs is not None and np.all(base_probs > 0):
        bayes_factors = bayes_factor_matrix(base_probs, prior_weights)
    elif base_probs is not None:
        diagnostics.append("Bayes factors unavailable: a model has zero estimated probability")

    return PosteriorReport(
        model_names=tuple(m.name for m in models),
        prior_weights_used=prior_weights,
        sampling_weights=sampling_weights,
        probs_indicator=report_m1.probs_indicator if report_m1 else None,
        probs_rao_blackwell=probs_rb,
        probs_stationary=probs_stationary,
        bayes_factors=bayes_factors,
        transition=transition,
        mc_standard_errors=mc_ses,
        cumulative_trace=report_m1.cumulative_trace if report_m1 else None,
        visit_frequencies=report_m1.visit_frequencies if report_m1 else None,
        seed=seed,
        iterations=iterations if method in {"1", "both"} else 0,
        chains=chains if method in {"1", "both"} else 0,
        burnin_iterations=report_m1.burnin_iterations if report_m1 else 0,
        draws_per_model=(int(transition.counts[0]) if transition is not None else None),
        diagnostics=tuple(dict.fromkeys(diagnostics)),
    )
