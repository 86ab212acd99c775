"""Density and sampler families used by the shipped model sets.

Every factory closes over fixed hyperparameters and returns a callable with
the ``(rows, hyper)`` signature expected by model specs, so priors that
condition on a shared hyperparameter (a precision) and priors that do not are
interchangeable. Log densities are vectorized over rows, return -inf outside
the support, and never emit NaN.
"""
from __future__ import annotations

import numpy as np
from scipy.special import betaln, gammaln

from .errors import ValidationError
from .palette import Dataset, SupplementalPrior

Array = np.ndarray

LOG_2PI = float(np.log(2.0 * np.pi))


def _rows(x, width: int, what: str) -> Array:
    rows = np.asarray(x, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != width:
        raise ValidationError(f"{what}: expected (m, {width}) rows, got shape {rows.shape}")
    return rows


def _hyper_per_row(hyper, m: int) -> Array:
    if hyper is None:
        raise ValidationError("this density conditions on a shared hyperparameter")
    v = np.asarray(hyper, dtype=float)
    if v.ndim == 0:
        return np.full(m, float(v))
    if v.ndim == 1 and v.size == m:
        return v
    if v.ndim == 1 and v.size == 1:
        return np.full(m, float(v[0]))
    raise ValidationError(f"hyperparameter must be scalar or per-row, got shape {v.shape}")


# ---------------------------------------------------------------------------
# parameter priors


def beta_prior(alpha, beta):
    """Independent Be(alpha_j, beta_j) coordinates on the open unit interval."""
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    b = np.atleast_1d(np.asarray(beta, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("alpha and beta must be matching vectors")
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValidationError("beta shape parameters must be positive")
    norm = float(np.sum(betaln(a, b)))

    def log_density(rows, hyper=None):
        x = _rows(rows, a.size, "beta prior")
        out = np.full(x.shape[0], -np.inf)
        inside = np.all((x > 0.0) & (x < 1.0), axis=1)
        if np.any(inside):
            xin = x[inside]
            out[inside] = ((a - 1.0) * np.log(xin) + (b - 1.0) * np.log1p(-xin)).sum(axis=1) - norm
        return out

    return log_density


def normal_inverse_gamma_prior(mean, covariance, shape, scale):
    """N(mean, covariance) coefficients with an inverse-gamma variance as the
    trailing coordinate.

    The inverse gamma is parameterized so that IG(a, b) has density
    proportional to x**-(a+1) * exp(-b/x), mean b/(a-1) and, for a > 2,
    standard deviation b/((a-1)*sqrt(a-2)).
    """
    mu = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape != (mu.size, mu.size):
        raise ValidationError("covariance shape does not match the mean")
    if shape <= 0 or scale <= 0:
        raise ValidationError("inverse-gamma shape and scale must be positive")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("coefficient prior covariance is not positive definite") from exc
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    prec = np.linalg.inv(cov)
    p = mu.size
    ig_norm = shape * np.log(scale) - gammaln(shape)
    coef_norm = -0.5 * (p * LOG_2PI + logdet)

    def log_density(rows, hyper=None):
        x = _rows(rows, p + 1, "normal-inverse-gamma prior")
        coefs = x[:, :p]
        sigma2 = x[:, p]
        dev = coefs - mu
        quad = np.einsum("ij,jk,ik->i", dev, prec, dev)
        out = np.full(x.shape[0], -np.inf)
        ok = sigma2 > 0.0
        s2 = sigma2[ok]
        out[ok] = (coef_norm - 0.5 * quad[ok]
                   + ig_norm - (shape + 1.0) * np.log(s2) - scale / s2)
        return out

    return log_density


def hierarchical_normal_prior(precision_multiplier):
    """Independent N(0, 1/(multiplier * V)) coordinates given a shared
    precision V passed as the hyperparameter."""
    mult = float(precision_multiplier)
    if mult <= 0:
        raise ValidationError("precision multiplier must be positive")

    def log_density(rows, hyper=None):
        x = np.asarray(rows, dtype=float)
        if x.ndim != 2:
            raise ValidationError(f"expected parameter rows, got shape {x.shape}")
        v = _hyper_per_row(hyper, x.shape[0])
        p = x.shape[1]
        tau = mult * v
        out = np.full(x.shape[0], -np.inf)
        ok = (tau > 0.0) & np.isfinite(tau)
        out[ok] = 0.5 * p * (np.log(tau[ok]) - LOG_2PI) - 0.5 * tau[ok] * (x[ok] ** 2).sum(axis=1)
        return out

    return log_density


# ---------------------------------------------------------------------------
# supplemental priors


def beta_supplement(dim: int, alpha: float, beta: float) -> SupplementalPrior:
    """iid Be(alpha, beta) padding coordinates."""
    if dim < 1:
        raise ValidationError("beta supplement needs at least one coordinate")
    base = beta_prior([alpha] * dim, [beta] * dim)

    def sample(m, hyper, rng):
        return rng.beta(alpha, beta, size=(m, dim))

    return SupplementalPrior(dim, base, sample)


def normal_supplement(dim: int, precision_multiplier: float) -> SupplementalPrior:
    """iid N(0, 1/(multiplier * V)) padding coordinates, conditioned on the
    shared precision V."""
    if dim < 1:
        raise ValidationError("normal supplement needs at least one coordinate")
    mult = float(precision_multiplier)
    base = hierarchical_normal_prior(mult)

    def sample(m, hyper, rng):
        v = _hyper_per_row(hyper, m)
        if np.any(v <= 0):
            raise ValidationError("shared precision must be positive")
        return rng.standard_normal((m, dim)) / np.sqrt(mult * v)[:, None]

    return SupplementalPrior(dim, base, sample)


def no_supplement() -> SupplementalPrior:
    """For models whose dimension already fills the palette."""

    def log_density(rows, hyper=None):
        return np.zeros(np.asarray(rows).shape[0])

    def sample(m, hyper, rng):
        return np.empty((m, 0))

    return SupplementalPrior(0, log_density, sample)


# ---------------------------------------------------------------------------
# likelihoods


def _design(data: Dataset, columns, add_intercept: bool) -> Array:
    cols = tuple(int(c) for c in columns)
    for c in cols:
        if c < 0 or c >= data.covariates.shape[1]:
            raise ValidationError(
                f"design column {c} out of range for {data.covariates.shape[1]} covariates"
            )
    parts = []
    if add_intercept:
        parts.append(np.ones((data.n, 1)))
    if cols:
        parts.append(data.covariates[:, cols])
    if not parts:
        raise ValidationError("design matrix has no columns")
    return np.hstack(parts)


def gaussian_regression_loglik(design_columns, add_intercept: bool = True):
    """Gaussian linear model log likelihood; the trailing theta coordinate is
    the error variance."""
    cols = tuple(int(c) for c in design_columns)

    def log_likelihood(theta_rows, data: Dataset):
        X = _design(data, cols, add_intercept)
        n, p = X.shape
        rows = _rows(theta_rows, p + 1, "gaussian regression")
        coefs = rows[:, :p]
        sigma2 = rows[:, p]
        y = data.responses
        gram = X.T @ X
        xty = X.T @ y
        yty = float(y @ y)
        rss = yty - 2.0 * coefs @ xty + np.einsum("ij,jk,ik->i", coefs, gram, coefs)
        np.maximum(rss, 0.0, out=rss)
        out = np.full(rows.shape[0], -np.inf)
        ok = sigma2 > 0.0
        out[ok] = -0.5 * n * (LOG_2PI + np.log(sigma2[ok])) - 0.5 * rss[ok] / sigma2[ok]
        return out

    return log_likelihood


def logistic_loglik(design_columns, add_intercept: bool = True, chunk: int = 1 << 21):
    """Bernoulli log likelihood under a logit link."""
    cols = tuple(int(c) for c in design_columns)

    def log_likelihood(beta_rows, data: Dataset):
        y = data.responses
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ValidationError("logistic responses must be 0/1")
        X = _design(data, cols, add_intercept)
        rows = _rows(beta_rows, X.shape[1], "logistic regression")
        m = rows.shape[0]
        out = np.empty(m)
        step = max(1, chunk // max(1, data.n))
        for lo in range(0, m, step):
            hi = min(m, lo + step)
            eta = rows[lo:hi] @ X.T
            out[lo:hi] = eta @ y - np.logaddexp(0.0, eta).sum(axis=1)
        return out

    return log_likelihood


def binomial_loglik(param_map):
    """Binomial counts: record i is y_i successes out of N_i trials (trials in
    covariate column 0), with success probability theta[param_map[i]]."""
    pmap = np.asarray(param_map, dtype=int)
    if pmap.ndim != 1 or pmap.size == 0:
        raise ValidationError("param_map must be a non-empty index vector")

    def log_likelihood(theta_rows, data: Dataset):
        y = data.responses
        trials = data.covariates[:, 0]
        if y.size != pmap.size:
            raise ValidationError(f"param_map covers {pmap.size} records, data has {y.size}")
        if np.any(y < 0) or np.any(y > trials):
            raise ValidationError("binomial records need 0 <= successes <= trials")
        rows = np.asarray(theta_rows, dtype=float)
        if rows.ndim != 2 or pmap.max() >= rows.shape[1]:
            raise ValidationError("param_map indexes past the parameter vector")
        const = float(np.sum(gammaln(trials + 1) - gammaln(y + 1) - gammaln(trials - y + 1)))
        p = rows[:, pmap]
        out = np.full(rows.shape[0], -np.inf)
        ok = np.all((p > 0.0) & (p < 1.0), axis=1)
        if np.any(ok):
            pin = p[ok]
            out[ok] = const + (y * np.log(pin) + (trials - y) * np.log1p(-pin)).sum(axis=1)
        return out

    return log_likelihood
