"""Fast sequential estimation of multivariate stochastic volatility.

Maintains a conjugate inverted-Wishart posterior of the volatility matrix of
a stream of log-returns, produces one-step forecast distributions, and scores
competing discount factors via plug-in log-likelihood, MSSE, and sequential
Bayes factors.
"""

__version__ = "0.1.0"

from . import diagnostics, errors, filtering, matstat, simulator
from ._kernels import NUMBA_ENABLED
from .diagnostics import (BayesFactorSeries, GridReport, LikelihoodAccumulator,
                          MsseAccumulator, bayes_factor, bayes_factor_series,
                          grid_search, loglik_constant, loglik_term, loglik_total,
                          msse_update)
from .filtering import (FilterRun, FilterState, ModelConfig, StepOutput,
                        compute_k, expectation_invariance_check, initial_state,
                        new_config, posterior_mean, prior_mean_next, run_filter,
                        step)
from .simulator import (SimConfig, SimPath, evolve_precision, rng_from_seed,
                        sample_singular_beta, simulate_path,
                        simulate_path_reference)

__all__ = [
    "NUMBA_ENABLED",
    "BayesFactorSeries", "GridReport", "LikelihoodAccumulator",
    "MsseAccumulator", "bayes_factor", "bayes_factor_series", "grid_search",
    "loglik_constant", "loglik_term", "loglik_total", "msse_update",
    "FilterRun", "FilterState", "ModelConfig", "StepOutput", "compute_k",
    "expectation_invariance_check", "initial_state", "new_config",
    "posterior_mean", "prior_mean_next", "run_filter", "step",
    "SimConfig", "SimPath", "evolve_precision", "rng_from_seed",
    "sample_singular_beta", "simulate_path", "simulate_path_reference",
    "diagnostics", "errors", "filtering", "matstat", "simulator",
]
