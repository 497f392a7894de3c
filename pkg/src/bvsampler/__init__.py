"""Adaptive MCMC and SMC samplers for Bayesian variable selection."""

__version__ = "0.1.0"

from .adaptation import (
    AdaptConfig,
    AdaptCounter,
    apply_adaptation,
    ia_update,
    init_proposal_params,
    rapa_update,
    step_size,
)
from .diagnostics import (
    EnumerationResult,
    EssResult,
    GoldStandard,
    PosteriorSummary,
    enumerate_posterior,
    ess,
    estimate_pips,
    mutation_rate,
    wmse,
)
from .errors import (
    BvsError,
    ConfigError,
    DataError,
    DegenerateWeightsError,
    InitOutOfRangeError,
    NumericalError,
    RankDeficientError,
    TooManyVariablesError,
)
from .model import (
    BetaInclusion,
    Dataset,
    FixedInclusion,
    GPrior,
    ModelPosterior,
    PriorSpec,
    RidgePrior,
    log_marginal_likelihood,
    log_model_prior,
    log_posterior_kernel,
)
from .proposal import (
    FlipRecord,
    ProposalParams,
    acceptance_pair,
    acceptance_probability,
    log_proposal_ratio,
    sample_proposal,
)
from .samplers import (
    ChainState,
    PtResult,
    RunResult,
    SmcResult,
    StageRecord,
    StepRecord,
    SwapRecord,
    TemperatureLadder,
    Trace,
    ia_step,
    mca_run,
    multimove_mh_step,
    multimove_run,
    pt_run,
    pt_step,
    smc_run,
    systematic_resample,
)

__all__ = [
    "BvsError",
    "ConfigError",
    "DataError",
    "DegenerateWeightsError",
    "InitOutOfRangeError",
    "NumericalError",
    "RankDeficientError",
    "TooManyVariablesError",
    "BetaInclusion",
    "Dataset",
    "FixedInclusion",
    "GPrior",
    "ModelPosterior",
    "PriorSpec",
    "RidgePrior",
    "log_marginal_likelihood",
    "log_model_prior",
    "log_posterior_kernel",
    "FlipRecord",
    "ProposalParams",
    "acceptance_pair",
    "acceptance_probability",
    "log_proposal_ratio",
    "sample_proposal",
    "AdaptConfig",
    "AdaptCounter",
    "apply_adaptation",
    "ia_update",
    "init_proposal_params",
    "rapa_update",
    "step_size",
    "EnumerationResult",
    "EssResult",
    "GoldStandard",
    "PosteriorSummary",
    "enumerate_posterior",
    "ess",
    "estimate_pips",
    "mutation_rate",
    "wmse",
    "ChainState",
    "PtResult",
    "RunResult",
    "SmcResult",
    "StageRecord",
    "StepRecord",
    "SwapRecord",
    "TemperatureLadder",
    "Trace",
    "ia_step",
    "mca_run",
    "multimove_mh_step",
    "multimove_run",
    "pt_run",
    "pt_step",
    "smc_run",
    "systematic_resample",
    "__version__",
]
