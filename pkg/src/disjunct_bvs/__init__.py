"""
disjunct-bvs: Bayesian variable selection for linear regression with
disjunct-support spike-and-slab priors.

The spike lives on ``[-delta, delta]`` and the slab on its complement, so a
coefficient enters the model only when it is practically relevant. A Gibbs
sampler explores the inclusion vector; posterior summaries turn the draws into
inclusion probabilities, a delta choice and Bayes factors.

Example usage:
    from disjunct_bvs import PriorConfig, RegressionData, SamplerSettings, run_chain

    data = RegressionData.from_arrays(X, y)
    prior = PriorConfig.calibrated(0.5)
    store = run_chain(data, prior, SamplerSettings(iterations=5000, seed=7))

    inclusion_probabilities(store)   # P(|beta_j| > 0.5 | y)
    most_frequent_model(store)       # 0-based indices of the modal model
"""


def _resolve_version() -> str:
    """Read the version from installed package metadata.

    The fallback only applies to a source checkout that was never installed.
    """
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("disjunct-bvs")
    except PackageNotFoundError:
        return "0.0.0.dev0"


__version__ = _resolve_version()

from disjunct_bvs.config import PriorConfig, PriorMode, RunConfig, SamplerSettings  # noqa: E402
from disjunct_bvs.distributions import (  # noqa: E402
    SupportRegion,
    calibrate_sigma0,
    log_trunc_norm_const,
    sample_scaled_inv_chisq,
    sample_trunc_norm,
    slab_marginal_density,
)
from disjunct_bvs.exceptions import (  # noqa: E402
    BVSError,
    CalibrationInfeasibleError,
    ChainAbortedError,
    ConfigurationError,
    DataParseError,
    DataValidationError,
    InvalidArgumentError,
    NumericalFailureError,
)
from disjunct_bvs.gibbs import SampleStore, gibbs_sweep, run_chain  # noqa: E402
from disjunct_bvs.model import (  # noqa: E402
    ChainState,
    RegressionData,
    log_joint_density,
    log_prior_indicator,
)
from disjunct_bvs.posterior import (  # noqa: E402
    estimate_log_bf,
    estimate_mse_bma,
    estimate_mse_for_delta,
    inclusion_probabilities,
    most_frequent_model,
    select_delta,
    top_models,
)
from disjunct_bvs.synthetic import (  # noqa: E402
    Regime,
    SyntheticSpec,
    bf_growth_experiment,
    generate,
    selection_benchmark,
)

__all__ = [
    "__version__",
    # Config
    "PriorConfig",
    "PriorMode",
    "RunConfig",
    "SamplerSettings",
    # Distributions
    "SupportRegion",
    "calibrate_sigma0",
    "log_trunc_norm_const",
    "sample_scaled_inv_chisq",
    "sample_trunc_norm",
    "slab_marginal_density",
    # Exceptions
    "BVSError",
    "CalibrationInfeasibleError",
    "ChainAbortedError",
    "ConfigurationError",
    "DataParseError",
    "DataValidationError",
    "InvalidArgumentError",
    "NumericalFailureError",
    # Model and sampler
    "ChainState",
    "RegressionData",
    "log_joint_density",
    "log_prior_indicator",
    "SampleStore",
    "gibbs_sweep",
    "run_chain",
    # Posterior
    "estimate_log_bf",
    "estimate_mse_bma",
    "estimate_mse_for_delta",
    "inclusion_probabilities",
    "most_frequent_model",
    "select_delta",
    "top_models",
    # Synthetic benchmarks
    "Regime",
    "SyntheticSpec",
    "bf_growth_experiment",
    "generate",
    "selection_benchmark",
]
