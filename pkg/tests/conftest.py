import numpy as np
import pytest

from palettemc import Dataset, LinearBijection, ModelSpec, SupplementalPrior
from palettemc.config import build_model_set
from palettemc.examples import binomial_config, binomial_dataset

LOG_2PI = float(np.log(2.0 * np.pi))


@pytest.fixture(scope="session")
def binomial_models():
    return build_model_set(binomial_config())


@pytest.fixture(scope="session")
def binomial_data():
    return binomial_dataset()


def _std_normal_logpdf(rows, hyper=None):
    rows = np.asarray(rows, dtype=float)
    return -0.5 * rows.shape[1] * LOG_2PI - 0.5 * (rows ** 2).sum(axis=1)


def _std_normal_supplement(dim):
    def sample(m, hyper, rng):
        return rng.standard_normal((m, dim))

    return SupplementalPrior(dim, _std_normal_logpdf, sample)


def toy_gaussian_model(model_id=1, d=2, n_params=None, weight=1.0, name="toy"):
    """Identity-bijection model with iid N(0, 1) coordinates and a flat
    likelihood; handy where only the palette machinery is under test."""
    n_params = d if n_params is None else n_params
    supplement = (SupplementalPrior(0, _std_normal_logpdf,
                                    lambda m, hyper, rng: np.empty((m, 0)))
                  if n_params == d else _std_normal_supplement(d - n_params))
    return ModelSpec(
        id=model_id,
        name=name,
        n_params=n_params,
        bijection=LinearBijection.identity(d),
        param_prior=_std_normal_logpdf,
        supplemental_prior=supplement,
        log_likelihood=lambda theta, data: np.zeros(np.asarray(theta).shape[0]),
        prior_weight=weight,
    )


@pytest.fixture
def flat_dataset():
    return Dataset([0.0], [[0.0]])
