"""Microblog message-diffusion model and link-monitoring pipeline."""

from .diffusion import (
    AgentState,
    BehaviorParams,
    DeltaDistribution,
    delta_distribution,
    sample_delta,
    transition_probability,
)
from .distfit import (
    ConvergenceError,
    PowerLawFit,
    WeibullFit,
    fit_powerlaw_mle,
    fit_weibull_mle,
    ks_statistic,
    weibull_pdf,
)
from .simulator import (
    AgentLifeStats,
    EventRecord,
    SimulationConfig,
    SimulationResult,
    replicate,
    repost_counts_by_link,
    run_simulation,
)

__version__ = "0.1.0"
