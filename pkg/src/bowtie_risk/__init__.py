"""Dynamic risk assessment over bow-tie hazard models.

The package splits into model + validation (:mod:`bowtie_risk.model`),
conditional functions (:mod:`bowtie_risk.conditional`), estimation from
episode logs (:mod:`bowtie_risk.estimation`), the runtime rate engine
(:mod:`bowtie_risk.engine`), the scene description language
(:mod:`bowtie_risk.sdl`), the scenario simulator
(:mod:`bowtie_risk.simulate`), file formats (:mod:`bowtie_risk.fileio`),
prediction scoring (:mod:`bowtie_risk.evaluation`), and the command line
(:mod:`bowtie_risk.cli`).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .conditional import (
    ConditionalFunction,
    Factor,
    FactorForm,
    FunctionKind,
    FusionMode,
    evaluate_barrier,
    evaluate_threat_rate,
    fuse_probabilities,
    fuse_rates,
)
from .engine import (
    LikelihoodComparison,
    MarginalRate,
    RiskTrace,
    assess_stream,
    all_consequence_rates,
    attenuate,
    average_rate,
    average_signal,
    compare_log_likelihood,
    consequence_rate,
    marginal_consequence_rate,
    moving_average,
    poisson_likelihood,
    poisson_log_likelihood,
    top_event_rate,
)
from .errors import (
    BowtieError,
    ConvergenceWarning,
    DegenerateBaseError,
    DegenerateDataError,
    IncompleteStateError,
    IsolationProtocolError,
    ModelFormatError,
    NodeLookupError,
    SdlParseError,
    StateDomainError,
    StreamOrderError,
    UndefinedRateWarning,
    VariableKindError,
)
from .estimation import (
    Episode,
    EpisodeLog,
    LogisticFit,
    estimate_discrete_factor,
    estimate_threat_rate,
    fit_barrier,
    fit_logistic,
    fit_sigmoid_factor,
    fit_threat,
    pooled_success_probability,
    succession_probability,
)
from .evaluation import EvaluationSummary, ScenePoint, evaluate_predictions
from .fileio import (
    factor_from_dict,
    factor_to_dict,
    function_from_dict,
    function_to_dict,
    load_log,
    load_model,
    load_scene_configs,
    load_state_trace,
    load_truth,
    model_from_dict,
    model_to_dict,
    save_log,
    save_model,
    save_risk_trace,
    save_scene_configs,
    save_state_trace,
    save_truth,
    truth_from_dict,
    truth_to_dict,
)
from .model import (
    BowTie,
    DiscretePmf,
    EventRole,
    Node,
    NodeType,
    SeverityClass,
    StatePrior,
    StateVariable,
    StateVector,
    UniformDensity,
    ValidationReport,
    VariableCategory,
    Violation,
    ViolationCode,
    validate,
)
from .sdl import (
    SceneConfig,
    SceneModel,
    format_scene,
    iter_scene_configs,
    parse_scene,
    sample_scene,
)
from .simulate import (
    EmpiricalRates,
    GroundTruth,
    JointTable,
    RateEstimate,
    empirical_rates,
    run_episodes,
)

__all__ = [name for name in dir() if not name.startswith("_")]
