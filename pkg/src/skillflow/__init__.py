"""Skill and delegation dynamics under AI assistance."""

from .config import DEFAULT, NumericsConfig
from .dynamics import effective_skill, eval_drift, loss
from .equilibria import Equilibrium, Jacobian2, Kind, all_equilibria, eigen2, jacobian, saddle_point
from .errors import (
    Degenerate,
    DegenerateParams,
    DomainError,
    EmptyData,
    ManifoldEscape,
    NonFinite,
    SingularPasting,
    SkillflowError,
    StepTooLarge,
    Unresolved,
    UnsupportedVariant,
)
from .estimation import (
    EstimatedParams,
    Prediction,
    SessionRecord,
    current_state,
    estimate_delta,
    estimate_eta,
    estimate_kappa,
    estimate_params,
    estimate_theta_a,
    parse_sessions,
    predict_outcome,
    read_sessions,
)
from .model import (
    DEFAULT_PARAMS,
    Asymmetric,
    DetectionPenalty,
    General,
    JaggedAI,
    MisperceivedAI,
    ModelParams,
    NoAI,
    PhaseState,
    Simplified,
    SkillDistribution,
    Velocity,
    validate_params,
)
from .performance import CrossingResult, GapSeries, crossing_curve, crossing_time, performance_gap
from .separatrix import (
    BasinGrid,
    BasinLabel,
    PiecewiseSeparatrix,
    SdeMethod,
    Separatrix,
    basin_grid,
    classify_basin,
    classify_basins,
    compute_separatrix,
    psi_approx,
    psi_eval,
    separatrix_sweep,
)
from .simulate import (
    DiscreteSimConfig,
    LimitLabel,
    SdeConfig,
    Trajectory,
    arrival_time,
    classify_limit,
    classify_many,
    integrate_ode,
    no_ai_time_to_reach,
    simulate_discrete,
    simulate_sde,
)

__version__ = "0.1.0"
