"""Independent oracles used by the tests.

Marginal likelihoods and posterior moments for the conjugate Gaussian
regression are computed here by analytic integration over the coefficients
followed by 1-d quadrature over log(sigma2); nothing in this module touches
the library's own evaluation paths.
"""
import numpy as np
from scipy import integrate, stats


def _log_integrand_factory(y, X, mean0, cov0, a, b):
    n = len(y)
    mu_y = X @ mean0
    xsx = X @ cov0 @ X.T
    eye = np.eye(n)

    def log_integrand(t):
        s2 = np.exp(t)
        # + t is the Jacobian of sigma2 = exp(t)
        return (stats.invgamma.logpdf(s2, a, scale=b) + t
                + stats.multivariate_normal.logpdf(y, mu_y, s2 * eye + xsx))

    return log_integrand


def _window(log_integrand, lo=-18.0, hi=18.0, points=481):
    grid = np.linspace(lo, hi, points)
    values = np.array([log_integrand(t) for t in grid])
    shift = values.max()
    keep = values > shift - 40.0
    return grid[keep][0] - 0.5, grid[keep][-1] + 0.5, shift


def log_marginal_gaussian_regression(y, X, mean0, cov0, a, b):
    """log m(y | model) for a Gaussian regression with N(mean0, cov0)
    coefficients and IG(a, b) error variance."""
    log_integrand = _log_integrand_factory(y, X, mean0, cov0, a, b)
    lo, hi, shift = _window(log_integrand)
    value, _ = integrate.quad(lambda t: np.exp(log_integrand(t) - shift), lo, hi,
                              limit=300)
    return shift + np.log(value)


def regression_posterior_moments(y, X, mean0, cov0, a, b):
    """Posterior means of the coefficients and of sigma2, by quadrature."""
    log_integrand = _log_integrand_factory(y, X, mean0, cov0, a, b)
    lo, hi, shift = _window(log_integrand)
    prec0 = np.linalg.inv(cov0)
    prec0_mean0 = prec0 @ mean0
    xtx = X.T @ X
    xty = X.T @ y

    def weight(t):
        return np.exp(log_integrand(t) - shift)

    def coef_mean(t):
        s2 = np.exp(t)
        return np.linalg.solve(prec0 + xtx / s2, prec0_mean0 + xty / s2)

    z, _ = integrate.quad(weight, lo, hi, limit=300)
    s2_mean = integrate.quad(lambda t: np.exp(t) * weight(t), lo, hi, limit=300)[0] / z
    p = len(mean0)
    coef = np.array([
        integrate.quad(lambda t: coef_mean(t)[j] * weight(t), lo, hi, limit=300)[0] / z
        for j in range(p)
    ])
    return coef, s2_mean


def batch_means_se(series, n_batches=20):
    """Plain batch-means standard error, reimplemented so tests do not lean on
    the library's version."""
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    width = n // n_batches
    trimmed = series[: n_batches * width]
    means = trimmed.reshape(n_batches, width, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


def bootstrap_store_se(prob_tables, n_boot=60, seed=0):
    """Finite-store component of the Monte Carlo error.

    Both estimators converge (in the draw/iteration budget) to the answer
    implied by the *empirical* store distributions, whose own sampling error
    the within-run batch means cannot see. Bootstrapping the store rows and
    re-solving the averaged transition matrix measures exactly that
    component.
    """
    import numpy as np

    from palettemc import stationary_distribution

    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(n_boot):
        rows = []
        for table in prob_tables:
            idx = rng.integers(table.shape[0], size=table.shape[0])
            mean = table[idx].mean(axis=0)
            rows.append(mean / mean.sum())
        try:
            draws.append(stationary_distribution(np.vstack(rows), row_sum_tol=1e-6))
        except Exception:
            continue
    draws = np.vstack(draws)
    return draws.std(axis=0, ddof=1)


def exact_binomial_posterior(alpha=1.0, beta=1.0, prior_odds=1.0):
    """Exact two-model answer for the built-in binomial example: closed-form
    marginal likelihoods through beta functions."""
    from scipy.special import betaln

    log_bf21 = (betaln(24 + alpha, 26 + beta)
                - betaln(8 + alpha, 12 + beta) - betaln(16 + alpha, 14 + beta))
    bf21 = np.exp(log_bf21)
    posterior_odds = bf21 * prior_odds
    return posterior_odds / (1.0 + posterior_odds), bf21
