"""The shared parameter space tying a set of models together.

Every model in a set draws its own parameters from one universal coordinate
vector, the palette. Model k recovers its parameters through an invertible
linear map Theta = A_k @ psi whose first n_params coordinates are the model's
own parameters theta and whose remaining coordinates are supplemental padding
u carrying a proper prior of its own. The prior induced on the palette by a
model is therefore its parameter prior times the supplemental prior times the
constant Jacobian |det A_k|, and moves between models are direct draws from a
categorical full conditional assembled entirely in the log domain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import DegeneratePaletteError, ValidationError

Array = np.ndarray


@dataclass(frozen=True)
class Palette:
    """A single point in the shared parameter space."""

    values: Array

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValidationError(f"palette must be a 1-d vector, got shape {values.shape}")
        if values.size == 0:
            raise ValidationError("palette must have at least one coordinate")
        if not np.all(np.isfinite(values)):
            raise ValidationError("palette entries must be finite")
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class LinearBijection:
    """Invertible linear map Theta = matrix @ psi with a constant Jacobian.

    The inverse and log|det| are computed once at construction; a singular
    matrix is rejected outright so downstream code never sees one.
    """

    matrix: Array
    inverse: Array = field(init=False, repr=False)
    log_abs_det: float = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"bijection matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("bijection matrix entries must be finite")
        sign, logdet = np.linalg.slogdet(a)
        if sign == 0 or not np.isfinite(logdet):
            raise ValidationError("bijection matrix is singular")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "inverse", np.linalg.inv(a))
        object.__setattr__(self, "log_abs_det", float(logdet))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, d: int) -> "LinearBijection":
        return cls(np.eye(d))

    @classmethod
    def permutation(cls, order: Sequence[int]) -> "LinearBijection":
        """Coordinate pick: Theta_i = psi[order[i]]."""
        order = list(order)
        if sorted(order) != list(range(len(order))):
            raise ValidationError(f"not a permutation of 0..{len(order) - 1}: {order}")
        a = np.zeros((len(order), len(order)))
        a[np.arange(len(order)), order] = 1.0
        return cls(a)


@dataclass(frozen=True)
class SupplementalPrior:
    """Proper prior for the padding coordinates of one model.

    ``log_density(u_rows, hyper)`` returns one value per row and
    ``sample(m, hyper, rng)`` returns an (m, dim) array. ``hyper`` is a shared
    scalar (or per-row vector) hyperparameter; families that do not condition
    on one simply ignore it.
    """

    dim: int
    log_density: Callable[[Array, Any], Array]
    sample: Callable[[int, Any, np.random.Generator], Array]

    def __post_init__(self):
        if self.dim < 0:
            raise ValidationError("supplemental dimension must be non-negative")


@dataclass(frozen=True)
class Dataset:
    """Observed records: a response vector plus per-record covariates."""

    responses: Array
    covariates: Array

    def __post_init__(self):
        y = np.asarray(self.responses, dtype=float)
        x = np.asarray(self.covariates, dtype=float)
        if y.ndim != 1:
            raise ValidationError(f"responses must be a vector, got shape {y.shape}")
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValidationError(f"covariates must be a matrix, got shape {x.shape}")
        if y.size == 0:
            raise ValidationError("no records")
        if x.shape[0] != y.size:
            raise ValidationError(
                f"covariate rows ({x.shape[0]}) do not match responses ({y.size})"
            )
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(x)):
            raise ValidationError("dataset contains missing or non-finite values")
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "covariates", x)

    @property
    def n(self) -> int:
        return self.responses.size


@dataclass(frozen=True)
class ModelSpec:
    """One model: dimension, palette map, priors, likelihood, prior weight.

    ``param_prior(theta_rows, hyper)`` and
    ``log_likelihood(theta_rows, data)`` are vectorized over rows and return
    -inf outside their support rather than raising.
    """

    id: int
    name: str
    n_params: int
    bijection: LinearBijection
    param_prior: Callable[[Array, Any], Array]
    supplemental_prior: SupplementalPrior
    log_likelihood: Callable[[Array, Dataset], Array]
    prior_weight: float

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError("model ids are 1-based")
        if self.n_params < 1:
            raise ValidationError("a model needs at least one parameter")
        if self.n_params > self.bijection.d:
            raise ValidationError(
                f"model '{self.name}': n_params {self.n_params} exceeds palette "
                f"dimension {self.bijection.d}"
            )
        if self.supplemental_prior.dim != self.bijection.d - self.n_params:
            raise ValidationError(
                f"model '{self.name}': supplemental dimension "
                f"{self.supplemental_prior.dim} must equal d - n_params = "
                f"{self.bijection.d - self.n_params}"
            )
        if not np.isfinite(self.prior_weight) or self.prior_weight <= 0:
            raise ValidationError(f"model '{self.name}': prior weight must be positive")

    @property
    def d(self) -> int:
        return self.bijection.d


def validate_model_set(models: Sequence[ModelSpec]) -> list[ModelSpec]:
    """Check that a sequence of models forms a coherent set (ids 1..K, one
    common palette dimension) and return it as a list."""
    models = list(models)
    if not models:
        raise ValidationError("empty model set")
    d = models[0].d
    for i, model in enumerate(models, start=1):
        if model.id != i:
            raise ValidationError(
                f"model ids must be 1..{len(models)} in order, got id {model.id} "
                f"in position {i}"
            )
        if model.d != d:
            raise ValidationError(
                f"model '{model.name}' lives on a palette of dimension {model.d}, "
                f"expected {d}"
            )
    return models


def _psi_vector(psi) -> Array:
    values = psi.values if isinstance(psi, Palette) else np.asarray(psi, dtype=float)
    if values.ndim != 1:
        raise ValidationError(f"expected a palette vector, got shape {values.shape}")
    return values


def _psi_rows(psi_rows) -> Array:
    rows = np.asarray(psi_rows, dtype=float)
    if rows.ndim != 2:
        raise ValidationError(f"expected palette rows, got shape {rows.shape}")
    return rows


def apply_bijection(model: ModelSpec, psi) -> tuple[Array, Array]:
    """Split A @ psi into the model's own parameters and its padding."""
    v = _psi_vector(psi)
    if v.size != model.d:
        raise ValidationError(f"palette has {v.size} coordinates, model expects {model.d}")
    theta_u = model.bijection.matrix @ v
    return theta_u[: model.n_params], theta_u[model.n_params:]


def apply_bijection_rows(model: ModelSpec, psi_rows) -> tuple[Array, Array]:
    """Row-wise ``apply_bijection`` over an (m, d) array."""
    rows = _psi_rows(psi_rows)
    if rows.shape[1] != model.d:
        raise ValidationError(
            f"palette rows have {rows.shape[1]} columns, model expects {model.d}"
        )
    theta_u = rows @ model.bijection.matrix.T
    return theta_u[:, : model.n_params], theta_u[:, model.n_params:]


def invert_bijection(model: ModelSpec, theta, u=()) -> Palette:
    """Recover the palette point mapping to (theta, u) under the model."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float)) if np.size(u) else np.empty(0)
    if theta.size != model.n_params:
        raise ValidationError(f"theta has {theta.size} entries, expected {model.n_params}")
    if u.size != model.d - model.n_params:
        raise ValidationError(f"u has {u.size} entries, expected {model.d - model.n_params}")
    return Palette(model.bijection.inverse @ np.concatenate([theta, u]))


def invert_bijection_rows(model: ModelSpec, theta_rows, u_rows) -> Array:
    """Row-wise ``invert_bijection``; returns an (m, d) array of palette rows."""
    theta = np.asarray(theta_rows, dtype=float)
    u = np.asarray(u_rows, dtype=float)
    if theta.ndim != 2 or theta.shape[1] != model.n_params:
        raise ValidationError(f"theta rows must be (m, {model.n_params})")
    if u.ndim != 2 or u.shape[1] != model.d - model.n_params or u.shape[0] != theta.shape[0]:
        raise ValidationError(f"u rows must be (m, {model.d - model.n_params})")
    return np.hstack([theta, u]) @ model.bijection.inverse.T


def log_psi_prior_rows(model: ModelSpec, psi_rows, hyper=None) -> Array:
    """Log density the model induces on palette rows (change of variables)."""
    theta, u = apply_bijection_rows(model, psi_rows)
    lp = np.asarray(model.param_prior(theta, hyper), dtype=float)
    if model.supplemental_prior.dim:
        lp = lp + np.asarray(model.supplemental_prior.log_density(u, hyper), dtype=float)
    return lp + model.bijection.log_abs_det


def log_psi_prior(model: ModelSpec, psi, hyper=None) -> float:
    """Log density of one palette point under one model's induced prior.

    Returns -inf when the point maps outside the model's support; this is a
    legitimate value, not an error.
    """
    v = _psi_vector(psi)
    if v.size != model.d:
        raise ValidationError(f"palette has {v.size} coordinates, model expects {model.d}")
    hyper_row = None if hyper is None else np.atleast_1d(np.asarray(hyper, dtype=float))
    return float(log_psi_prior_rows(model, v[None, :], hyper_row)[0])


def log_sum_exp(values) -> float:
    """log(sum(exp(values))) computed against the running maximum.

    Exact for a single entry; raises if the input is empty or every entry is
    -inf (the caller decides how to treat that degeneracy).
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValidationError(f"expected a vector, got shape {v.shape}")
    if v.size == 0:
        raise ValidationError("log_sum_exp of an empty vector")
    m = float(np.max(v))
    if m == -np.inf:
        raise ValidationError("log_sum_exp: every entry is -inf")
    return m + float(np.log(np.sum(np.exp(v - m))))


def model_log_posterior_kernels_rows(psi_rows, models: Sequence[ModelSpec],
                                     data: Dataset, hyper=None) -> Array:
    """Per-model log likelihood-times-prior at each palette row.

    Model prior weights are *not* included; add log weights to the columns to
    get full unnormalized log posterior weights.
    """
    rows = _psi_rows(psi_rows)
    models = list(models)
    out = np.empty((rows.shape[0], len(models)))
    for k, model in enumerate(models):
        theta, _ = apply_bijection_rows(model, rows)
        lp = log_psi_prior_rows(model, rows, hyper)
        ll = np.asarray(model.log_likelihood(theta, data), dtype=float)
        out[:, k] = lp + ll
    return out


def probs_from_log_weights(log_weights_rows) -> Array:
    """Normalize rows of log weights into probability rows.

    A row whose entries are all -inf has no admissible model and is reported
    as a degenerate palette point.
    """
    logw = np.asarray(log_weights_rows, dtype=float)
    m = logw.max(axis=1)
    dead = ~np.isfinite(m)
    if np.any(dead):
        raise DegeneratePaletteError(
            f"palette row {int(np.flatnonzero(dead)[0])} has zero weight under "
            "every model"
        )
    p = np.exp(logw - m[:, None])
    p /= p.sum(axis=1, keepdims=True)
    return p


def full_conditional_rows(psi_rows, models: Sequence[ModelSpec], data: Dataset,
                          hyper=None) -> Array:
    """Categorical full-conditional probabilities over models, one row per
    palette row."""
    models = list(models)
    kernels = model_log_posterior_kernels_rows(psi_rows, models, data, hyper)
    log_weights = np.log([model.prior_weight for model in models])
    return probs_from_log_weights(kernels + log_weights)


def full_conditional_model_probs(psi, models: Sequence[ModelSpec], data: Dataset,
                                 hyper=None) -> Array:
    """Probability vector for the next-model draw at one palette point.

    Prior weights enter in ratio only, so any positive scaling of the weights
    leaves the result unchanged.
    """
    v = _psi_vector(psi)
    hyper_row = None if hyper is None else np.atleast_1d(np.asarray(hyper, dtype=float))
    return full_conditional_rows(v[None, :], models, data, hyper_row)[0]
