"""Orbital pursuit-evasion simulator, scenario generator, and agent harness."""

from .dynamics import (
    DEFAULT_BODY,
    BodyConstants,
    OrbitalElements,
    StateVector,
    elements_to_state,
    propagate_coast,
    propagate_thrusted,
    rsw_basis,
    solve_kepler,
    state_to_elements,
)
from .environment import (
    EnvironmentConfig,
    Observation,
    PursuitEvasionEnv,
    StepResult,
    ThrottleVector,
    evader_policy,
)
from .episodes import EpisodeLog, closest_approach, read_log, write_log
from .evaluation import CoastAgent, EvaluationReport, evaluate, render_report, run_episode
from .llm import (
    ContextWindow,
    EndpointConfig,
    LLMAgent,
    ScriptedBackend,
    ScriptedBackendServer,
    VerbalAction,
    action_to_throttle,
    parse_response,
    serialize_prompt,
)
from .navball import NavballAgent, compute_navball
from .scenarios import (
    Scenario,
    ScenarioConstraints,
    default_evader_elements,
    generate_batch,
    sample_scenario,
    verify_constraints,
)
from .service import ServiceConfig, SessionService

__version__ = "0.1.0"
