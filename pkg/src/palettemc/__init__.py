"""Posterior model probabilities and Bayes factors from model-specific MCMC
output, via a shared palette of parameters and per-model bijections."""

from .errors import (DegeneracyError, DegeneratePaletteError, ReducibleChainError,
                     ValidationError)
from .palette import (Dataset, LinearBijection, ModelSpec, Palette,
                      SupplementalPrior, apply_bijection, apply_bijection_rows,
                      full_conditional_model_probs, full_conditional_rows,
                      invert_bijection, invert_bijection_rows, log_psi_prior,
                      log_psi_prior_rows, log_sum_exp, validate_model_set)
from .samplers import (ConjugateRegressionConfig, HierarchicalLogisticConfig,
                       SampleMeta, SampleStore, acceptance_probability,
                       build_psi_store, gibbs_linear_regression,
                       mh_logistic_hierarchical, sample_beta_posterior,
                       sample_precision_conditional, sample_supplemental)
from .postprocess import (PosteriorReport, TransitionEstimate,
                          bayes_factor_matrix, method1_chain, method2_transition,
                          reweight_under_prior, run_analysis,
                          stationary_distribution, tune_model_priors)
from .run import run_config, run_example

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
