"""Learning random real-time treatment-switching policies from logged trajectories."""

from .core import (
    COMPLETION_LINEXP,
    LINEXP,
    OXYTOCIN_LINEXP,
    SIGMOID_SWITCH,
    HistoryView,
    IntensitySpec,
    TimeGrid,
    UnitRecord,
    history_at,
    intensity_eval,
    sigmoid,
)
from .errors import ConfigError, DataError, DiagnosticError, RtdtrError
from .inference import McmcConfig, PosteriorDraws, posterior_summary, sample_posterior
from .policy import (
    DeConfig,
    PolicyEstimate,
    WeightVector,
    compute_weights,
    de_minimize,
    optimize_eta,
    posterior_predictive_loss,
    unopt_baseline,
    weight_diagnostics,
)
from .simgen import (
    CaseConfig,
    Cohort,
    ReplicateParams,
    draw_replicate_params,
    evaluate_policy_loss,
    generate_cohort,
    simulate_unit,
)

__version__ = "0.1.0"
