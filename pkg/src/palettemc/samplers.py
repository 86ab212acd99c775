"""Per-model posterior samplers and the palette stores they feed.

Models are fitted one at a time: draw theta from the model's own posterior,
attach an independent draw of the supplemental padding coordinates, and map
the pair back through the inverse bijection. The stored rows are then draws
from that model's palette posterior, ready for post-processing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .palette import Dataset, ModelSpec

Array = np.ndarray


@dataclass(frozen=True)
class SampleMeta:
    """Provenance of a store: retained draws, burn-in discarded, seed."""

    draws: int
    burnin: int = 0
    seed: int | None = None


@dataclass(frozen=True)
class SampleStore:
    """Retained palette draws for one model, plus any shared hyperparameter
    column sampled alongside them."""

    model_id: int
    psi_draws: Array
    hyper_draws: Array | None = None
    meta: SampleMeta | None = None

    def __post_init__(self):
        psi = np.asarray(self.psi_draws, dtype=float)
        if psi.ndim != 2 or psi.shape[0] < 1:
            raise ValidationError(f"psi_draws must be a non-empty matrix, got shape {psi.shape}")
        if not np.all(np.isfinite(psi)):
            raise ValidationError("psi_draws contains non-finite values")
        object.__setattr__(self, "psi_draws", psi)
        if self.hyper_draws is not None:
            hyper = np.asarray(self.hyper_draws, dtype=float)
            if hyper.ndim != 1 or hyper.size != psi.shape[0]:
                raise ValidationError("hyper_draws must hold one value per stored row")
            if not np.all(np.isfinite(hyper)):
                raise ValidationError("hyper_draws contains non-finite values")
            object.__setattr__(self, "hyper_draws", hyper)
        if self.meta is None:
            object.__setattr__(self, "meta", SampleMeta(draws=psi.shape[0]))

    @property
    def n_draws(self) -> int:
        return self.psi_draws.shape[0]

    @property
    def d(self) -> int:
        return self.psi_draws.shape[1]


@dataclass(frozen=True)
class ConjugateRegressionConfig:
    """Conjugate priors for a Gaussian linear model: normal coefficients and
    an inverse-gamma error variance (density ~ x**-(a+1) exp(-b/x))."""

    coef_prior_mean: Array
    coef_prior_covariance: Array
    variance_prior_shape: float
    variance_prior_scale: float

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.coef_prior_mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.coef_prior_covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValidationError("coefficient prior covariance does not match the mean")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValidationError("coefficient prior covariance is not positive definite") from exc
        if self.variance_prior_shape <= 0 or self.variance_prior_scale <= 0:
            raise ValidationError("variance prior shape and scale must be positive")
        object.__setattr__(self, "coef_prior_mean", mean)
        object.__setattr__(self, "coef_prior_covariance", cov)


@dataclass(frozen=True)
class HierarchicalLogisticConfig:
    """Shared setup for a family of logistic models whose coefficients get
    N(0, 1/(multiplier * V)) priors under one common precision V."""

    design_columns: tuple[tuple[int, ...], ...]
    precision_multipliers: tuple[float, ...]
    v_prior_shape: float = 3.29
    v_prior_rate: float = 7.80
    proposal_scale: float = 0.2

    def __post_init__(self):
        cols = tuple(tuple(int(c) for c in model_cols) for model_cols in self.design_columns)
        mults = tuple(float(m) for m in self.precision_multipliers)
        if len(cols) != len(mults):
            raise ValidationError("one precision multiplier per model is required")
        if any(m < 1 for m in mults):
            raise ValidationError("precision multipliers must be >= 1")
        if self.v_prior_shape <= 0 or self.v_prior_rate <= 0:
            raise ValidationError("precision prior shape and rate must be positive")
        if self.proposal_scale <= 0:
            raise ValidationError("proposal scale must be positive")
        object.__setattr__(self, "design_columns", cols)
        object.__setattr__(self, "precision_multipliers", mults)


def sample_beta_posterior(successes: int, trials: int, alpha: float, beta: float,
                          rng: np.random.Generator) -> float:
    """One draw from the conjugate posterior Be(successes + alpha,
    trials - successes + beta)."""
    if trials < 0 or successes < 0 or successes > trials:
        raise ValidationError(f"invalid counts: {successes} successes in {trials} trials")
    if alpha <= 0 or beta <= 0:
        raise ValidationError("beta prior parameters must be positive")
    return float(rng.beta(successes + alpha, trials - successes + beta))


def gibbs_linear_regression(data: Dataset, config: ConjugateRegressionConfig,
                            iters: int, burnin: int,
                            rng: np.random.Generator) -> tuple[Array, Array]:
    """Alternate the conjugate full conditionals of a Gaussian linear model.

    The design is an intercept column plus every covariate column of ``data``.
    Coefficients given the variance are multivariate normal with precision
    (prior precision + X'X / sigma2); the variance given the coefficients is
    inverse gamma with shape a + n/2 and scale b + rss/2. Returns the retained
    (coefficients, sigma2) chain.
    """
    if burnin < 0 or iters <= burnin:
        raise ValidationError("need iters > burnin >= 0")
    if data.n < 2:
        raise ValidationError("need at least two records")
    X = np.column_stack([np.ones(data.n), data.covariates])
    y = data.responses
    p = X.shape[1]
    mean0 = config.coef_prior_mean
    if mean0.size != p:
        raise ValidationError(f"prior mean has {mean0.size} entries, design needs {p}")
    prec0 = np.linalg.inv(config.coef_prior_covariance)
    prec0_mean0 = prec0 @ mean0
    xtx = X.T @ X
    xty = X.T @ y
    a = config.variance_prior_shape
    b = config.variance_prior_scale
    a_post = a + 0.5 * data.n

    sigma2 = b / (a - 1.0) if a > 1.0 else b
    keep = iters - burnin
    coef_draws = np.empty((keep, p))
    sigma2_draws = np.empty(keep)
    for it in range(iters):
        prec = prec0 + xtx / sigma2
        chol = np.linalg.cholesky(prec)
        mean = np.linalg.solve(prec, prec0_mean0 + xty / sigma2)
        coefs = mean + np.linalg.solve(chol.T, rng.standard_normal(p))
        resid = y - X @ coefs
        sigma2 = (b + 0.5 * float(resid @ resid)) / rng.gamma(a_post)
        if it >= burnin:
            coef_draws[it - burnin] = coefs
            sigma2_draws[it - burnin] = sigma2
    return coef_draws, sigma2_draws


def acceptance_probability(log_ratio: float) -> float:
    """Metropolis acceptance probability for a symmetric proposal."""
    return float(np.exp(min(0.0, log_ratio)))


def sample_precision_conditional(beta: Array, multiplier: float, shape: float,
                                 rate: float, rng: np.random.Generator) -> float:
    """Conjugate gamma draw for the shared precision given coefficients:
    Ga(shape + p/2, rate + multiplier * sum(beta^2) / 2)."""
    beta = np.asarray(beta, dtype=float)
    shape_post = shape + 0.5 * beta.size
    rate_post = rate + 0.5 * multiplier * float(beta @ beta)
    return float(rng.gamma(shape_post, 1.0 / rate_post))


def mh_logistic_hierarchical(data: Dataset, config: HierarchicalLogisticConfig,
                             model: ModelSpec, iters: int, burnin: int,
                             rng: np.random.Generator) -> tuple[Array, Array]:
    """Random-walk Metropolis within Gibbs for one logistic model.

    Coefficients move one at a time under a Gaussian random walk against the
    Bernoulli likelihood and their N(0, 1/(multiplier * V)) prior; the shared
    precision V is refreshed from its conjugate gamma full conditional after
    each sweep. Returns the retained (beta, V) chain.
    """
    if burnin < 0 or iters <= burnin:
        raise ValidationError("need iters > burnin >= 0")
    y = data.responses
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValidationError("logistic responses must be 0/1")
    k = model.id - 1
    if k >= len(config.design_columns):
        raise ValidationError(f"no design columns configured for model {model.id}")
    cols = config.design_columns[k]
    mult = config.precision_multipliers[k]
    parts = [np.ones((data.n, 1))]
    if cols:
        parts.append(data.covariates[:, list(cols)])
    X = np.hstack(parts)
    p = X.shape[1]
    if p != model.n_params:
        raise ValidationError(
            f"model '{model.name}' has {model.n_params} parameters but its design has {p} columns"
        )

    beta = np.zeros(p)
    v = config.v_prior_shape / config.v_prior_rate
    eta = X @ beta
    loglik = float(eta @ y - np.logaddexp(0.0, eta).sum())
    keep = iters - burnin
    beta_draws = np.empty((keep, p))
    v_draws = np.empty(keep)
    for it in range(iters):
        for j in range(p):
            prop = beta[j] + config.proposal_scale * rng.standard_normal()
            eta_prop = eta + X[:, j] * (prop - beta[j])
            loglik_prop = float(eta_prop @ y - np.logaddexp(0.0, eta_prop).sum())
            log_ratio = (loglik_prop - loglik
                         - 0.5 * mult * v * (prop * prop - beta[j] * beta[j]))
            if rng.random() < acceptance_probability(log_ratio):
                beta[j] = prop
                eta = eta_prop
                loglik = loglik_prop
        v = sample_precision_conditional(beta, mult, config.v_prior_shape,
                                         config.v_prior_rate, rng)
        if it >= burnin:
            beta_draws[it - burnin] = beta
            v_draws[it - burnin] = v
    return beta_draws, v_draws


def sample_supplemental(model: ModelSpec, hyper, rng: np.random.Generator) -> Array:
    """Independent draw of the padding coordinates for one model."""
    return model.supplemental_prior.sample(1, hyper, rng)[0]


def build_psi_store(model: ModelSpec, theta_chain, hyper_chain=None,
                    rng: np.random.Generator | None = None, *,
                    burnin: int = 0, seed: int | None = None) -> SampleStore:
    """Map a retained theta chain to stored palette rows.

    Each theta row is padded with a fresh supplemental draw and pushed through
    the inverse bijection; a hyperparameter chain, when present, is carried
    through unchanged, one value per row.
    """
    theta = np.asarray(theta_chain, dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    if theta.ndim != 2 or theta.shape[0] < 1:
        raise ValidationError("theta chain must be a non-empty matrix")
    if theta.shape[1] != model.n_params:
        raise ValidationError(
            f"theta chain has {theta.shape[1]} columns, model '{model.name}' "
            f"expects {model.n_params}"
        )
    m = theta.shape[0]
    hyper = None
    if hyper_chain is not None:
        hyper = np.asarray(hyper_chain, dtype=float)
        if hyper.ndim != 1 or hyper.size != m:
            raise ValidationError("hyper chain must hold one value per theta row")
    if model.supplemental_prior.dim:
        if rng is None:
            raise ValidationError("an rng is required to draw supplemental coordinates")
        u = model.supplemental_prior.sample(m, hyper, rng)
    else:
        u = np.empty((m, 0))
    psi = np.hstack([theta, u]) @ model.bijection.inverse.T
    return SampleStore(model.id, psi, hyper, SampleMeta(m, burnin, seed))
