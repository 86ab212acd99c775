import numpy as np
import pytest
from scipy import integrate, stats

from palettemc import Dataset, ValidationError, families


rng = np.random.default_rng(42)


class TestBetaPrior:
    def test_matches_scipy_on_grid(self):
        prior = families.beta_prior([2.0, 15.0], [3.0, 15.0])
        x = rng.uniform(0.01, 0.99, size=(25, 2))
        expected = stats.beta.logpdf(x[:, 0], 2, 3) + stats.beta.logpdf(x[:, 1], 15, 15)
        np.testing.assert_allclose(prior(x), expected, rtol=1e-12)

    def test_integrates_to_one(self):
        prior = families.beta_prior([15.0], [15.0])
        total, _ = integrate.quad(lambda x: np.exp(prior(np.array([[x]]))[0]), 0, 1)
        assert total == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("point", [[-0.1, 0.5], [0.0, 0.5], [0.5, 1.0], [1.2, 0.5]])
    def test_outside_support(self, point):
        prior = families.beta_prior([1.0, 1.0], [1.0, 1.0])
        value = prior(np.array([point]))
        assert value[0] == -np.inf and not np.isnan(value[0])

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValidationError):
            families.beta_prior([1.0], [-1.0])


class TestNormalInverseGammaPrior:
    def test_matches_scipy(self):
        mean = np.array([3000.0, 185.0])
        cov = np.diag([1e6, 1e4])
        prior = families.normal_inverse_gamma_prior(mean, cov, 3.0, 180_000.0)
        coefs = mean + rng.normal(scale=[500, 50], size=(20, 2))
        sigma2 = rng.uniform(1e4, 3e5, size=20)
        rows = np.column_stack([coefs, sigma2])
        expected = (stats.multivariate_normal.logpdf(coefs, mean, cov)
                    + stats.invgamma.logpdf(sigma2, 3.0, scale=180_000.0))
        np.testing.assert_allclose(prior(rows), expected, rtol=1e-10)

    def test_nonpositive_variance(self):
        prior = families.normal_inverse_gamma_prior([0.0], [[1.0]], 3.0, 2.0)
        values = prior(np.array([[0.0, 0.0], [0.0, -1.0]]))
        assert np.all(values == -np.inf)

    def test_rejects_bad_covariance(self):
        with pytest.raises(ValidationError):
            families.normal_inverse_gamma_prior([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], 3.0, 2.0)


class TestHierarchicalNormalPrior:
    def test_matches_scipy_scalar_hyper(self):
        prior = families.hierarchical_normal_prior(3.0)
        x = rng.normal(size=(15, 4))
        v = 0.7
        expected = stats.norm.logpdf(x, scale=1.0 / np.sqrt(3.0 * v)).sum(axis=1)
        np.testing.assert_allclose(prior(x, v), expected, rtol=1e-12)

    def test_matches_scipy_vector_hyper(self):
        prior = families.hierarchical_normal_prior(2.0)
        x = rng.normal(size=(10, 2))
        v = rng.uniform(0.2, 2.0, size=10)
        expected = stats.norm.logpdf(x, scale=1.0 / np.sqrt(2.0 * v[:, None])).sum(axis=1)
        np.testing.assert_allclose(prior(x, v), expected, rtol=1e-12)

    def test_integrates_to_one(self):
        prior = families.hierarchical_normal_prior(3.0)
        total, _ = integrate.quad(
            lambda t: np.exp(prior(np.array([[t]]), 2.0)[0]), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_requires_hyper(self):
        prior = families.hierarchical_normal_prior(1.0)
        with pytest.raises(ValidationError):
            prior(np.zeros((3, 2)))


class TestSupplements:
    def test_beta_supplement_sample_moments(self):
        supp = families.beta_supplement(1, 15.0, 15.0)
        draws = supp.sample(100_000, None, np.random.default_rng(0))
        assert draws.shape == (100_000, 1)
        assert draws.mean() == pytest.approx(0.5, abs=0.005)

    def test_normal_supplement_sample_moments(self):
        supp = families.normal_supplement(3, 1.0)
        draws = supp.sample(100_000, 1.0, np.random.default_rng(1))
        assert draws.shape == (100_000, 3)
        assert draws.std() == pytest.approx(1.0, abs=0.02)

    def test_normal_supplement_conditions_on_hyper_rows(self):
        supp = families.normal_supplement(1, 2.0)
        v = np.full(50_000, 8.0)
        draws = supp.sample(v.size, v, np.random.default_rng(2))
        assert draws.std() == pytest.approx(1.0 / 4.0, abs=0.01)

    def test_no_supplement(self):
        supp = families.no_supplement()
        assert supp.dim == 0
        assert supp.sample(5, None, np.random.default_rng(0)).shape == (5, 0)
        np.testing.assert_array_equal(supp.log_density(np.empty((4, 0)), None), np.zeros(4))


class TestGaussianRegressionLoglik:
    def test_matches_scipy(self):
        n = 12
        x = rng.normal(size=n)
        y = 0.5 + 1.5 * x + rng.normal(size=n)
        data = Dataset(y, x)
        loglik = families.gaussian_regression_loglik([0])
        theta = np.column_stack([rng.normal(size=(8, 2)), rng.uniform(0.5, 2.0, size=8)])
        expected = np.array([
            stats.norm.logpdf(y, t[0] + t[1] * x, np.sqrt(t[2])).sum() for t in theta
        ])
        np.testing.assert_allclose(loglik(theta, data), expected, rtol=1e-9)

    def test_nonpositive_variance(self):
        data = Dataset([1.0, 2.0], [[0.1], [0.2]])
        loglik = families.gaussian_regression_loglik([0])
        values = loglik(np.array([[0.0, 1.0, 0.0], [0.0, 1.0, -2.0]]), data)
        assert np.all(values == -np.inf)


class TestLogisticLoglik:
    def test_matches_direct_bernoulli(self):
        n = 30
        s = rng.choice([-1.0, 1.0], size=n)
        ell = rng.normal(size=n)
        eta_true = 0.3 + 0.8 * s
        y = (rng.random(n) < 1 / (1 + np.exp(-eta_true))).astype(float)
        data = Dataset(y, np.column_stack([s, ell]))
        loglik = families.logistic_loglik([0, 1])
        beta = rng.normal(size=(6, 3))
        eta = beta[:, 0:1] + np.outer(beta[:, 1], s) + np.outer(beta[:, 2], ell)
        p = 1 / (1 + np.exp(-eta))
        expected = (np.log(p) * y + np.log1p(-p) * (1 - y)).sum(axis=1)
        np.testing.assert_allclose(loglik(beta, data), expected, rtol=1e-9)

    def test_rejects_non_binary(self):
        data = Dataset([0.0, 2.0], [[1.0], [0.5]])
        loglik = families.logistic_loglik([0])
        with pytest.raises(ValidationError):
            loglik(np.zeros((1, 2)), data)

    def test_chunking_consistent(self):
        n = 40
        x = rng.normal(size=n)
        y = (rng.random(n) < 0.5).astype(float)
        data = Dataset(y, x)
        beta = rng.normal(size=(100, 2))
        small = families.logistic_loglik([0], chunk=64)
        big = families.logistic_loglik([0])
        np.testing.assert_allclose(small(beta, data), big(beta, data), rtol=1e-14)


class TestBinomialLoglik:
    def test_matches_scipy(self, binomial_data):
        loglik = families.binomial_loglik([0, 1])
        theta = rng.uniform(0.05, 0.95, size=(10, 2))
        expected = (stats.binom.logpmf(8, 20, theta[:, 0])
                    + stats.binom.logpmf(16, 30, theta[:, 1]))
        np.testing.assert_allclose(loglik(theta, binomial_data), expected, rtol=1e-10)

    def test_shared_rate_param_map(self, binomial_data):
        loglik = families.binomial_loglik([0, 0])
        theta = np.array([[0.45, 0.99]])  # second column unused
        expected = stats.binom.logpmf(8, 20, 0.45) + stats.binom.logpmf(16, 30, 0.45)
        assert loglik(theta, binomial_data)[0] == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.3])
    def test_outside_support(self, binomial_data, p):
        loglik = families.binomial_loglik([0, 1])
        value = loglik(np.array([[p, 0.5]]), binomial_data)
        assert value[0] == -np.inf and not np.isnan(value[0])

    def test_rejects_bad_counts(self):
        data = Dataset([25.0], [[20.0]])  # more successes than trials
        loglik = families.binomial_loglik([0])
        with pytest.raises(ValidationError):
            loglik(np.array([[0.5]]), data)
