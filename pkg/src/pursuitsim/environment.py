"""Pursuit-evasion episode state machine with a gym-style reset/step contract.

One environment instance owns one episode: it advances both vessels at a
fixed decision cadence, applies the pursuer's commanded throttle and the
evader's heuristic burn, and emits a telemetry Observation after every step.
Instances hold no global state, so independent episodes can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    ImpactError,
    StateVector,
    elements_to_state,
    propagate_thrusted,
    rsw_basis,
)
from .scenarios import Scenario, verify_constraints

TERMINATION_NONE = "none"
TERMINATION_TIME_LIMIT = "time_limit"
TERMINATION_IMPACT = "impact"


class EpisodeFinishedError(Exception):
    """step() called on a terminated (or never reset) episode."""


class InvalidScenarioError(Exception):
    """Scenario rejected by constraint verification."""

    def __init__(self, report):
        super().__init__("scenario violates constraints:\n" + report.summary())
        self.report = report


@dataclass(frozen=True)
class ThrottleVector:
    """Discrete per-axis throttle in the vessel's RSW frame.

    Components are -1 (full reverse), 0 (off), or +1 (full), scaled by the
    vessel's maximum acceleration when applied.
    """

    radial: int = 0
    along_track: int = 0
    cross_track: int = 0

    def __post_init__(self):
        for name in ("radial", "along_track", "cross_track"):
            if getattr(self, name) not in (-1, 0, 1):
                raise ValueError(f"{name} must be -1, 0, or +1")

    def scaled(self, max_accel: float) -> tuple[float, float, float]:
        return (self.radial * max_accel, self.along_track * max_accel,
                self.cross_track * max_accel)


COAST_THROTTLE = ThrottleVector(0, 0, 0)
EVADER_PROGRADE_BURN = ThrottleVector(0, 1, 0)


@dataclass(frozen=True)
class Observation:
    """Telemetry snapshot handed to agents at each decision tick.

    Relative quantities are evader-minus-pursuer, expressed in the pursuer's
    RSW frame; range_rate is negative while closing.
    """

    mission_time: float
    pursuer_position: np.ndarray
    pursuer_velocity: np.ndarray
    evader_position: np.ndarray
    evader_velocity: np.ndarray
    relative_position: np.ndarray
    relative_velocity: np.ndarray
    range: float
    range_rate: float

    def to_dict(self) -> dict:
        return {
            "mission_time": self.mission_time,
            "pursuer_position": [float(x) for x in self.pursuer_position],
            "pursuer_velocity": [float(x) for x in self.pursuer_velocity],
            "evader_position": [float(x) for x in self.evader_position],
            "evader_velocity": [float(x) for x in self.evader_velocity],
            "relative_position": [float(x) for x in self.relative_position],
            "relative_velocity": [float(x) for x in self.relative_velocity],
            "range": self.range,
            "range_rate": self.range_rate,
        }

    @staticmethod
    def from_dict(data: dict) -> "Observation":
        return Observation(
            mission_time=float(data["mission_time"]),
            pursuer_position=np.array(data["pursuer_position"], dtype=float),
            pursuer_velocity=np.array(data["pursuer_velocity"], dtype=float),
            evader_position=np.array(data["evader_position"], dtype=float),
            evader_velocity=np.array(data["evader_velocity"], dtype=float),
            relative_position=np.array(data["relative_position"], dtype=float),
            relative_velocity=np.array(data["relative_velocity"], dtype=float),
            range=float(data["range"]),
            range_rate=float(data["range_rate"]),
        )


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    terminated: bool
    termination_reason: str = TERMINATION_NONE

    def __post_init__(self):
        if self.terminated != (self.termination_reason != TERMINATION_NONE):
            raise ValueError("terminated flag must match termination_reason")

    def to_dict(self) -> dict:
        return {
            "observation": self.observation.to_dict(),
            "terminated": self.terminated,
            "termination_reason": self.termination_reason,
        }


@dataclass(frozen=True)
class EnvironmentConfig:
    """Cadence, thrust, and evader-heuristic parameters."""

    decision_interval: float = 1.0
    physics_substep: float = 0.1
    pursuer_max_accel: float = 1.0
    evader_max_accel: float = 0.25
    evader_activation_range: float = 1000.0

    def __post_init__(self):
        if self.decision_interval <= 0.0 or self.physics_substep <= 0.0:
            raise ValueError("decision_interval and physics_substep must be positive")
        if self.physics_substep > self.decision_interval:
            raise ValueError("physics_substep must not exceed decision_interval")


def evader_policy(observation: Observation,
                  activation_range: float = 1000.0) -> ThrottleVector:
    """Range-triggered evasion heuristic: burn prograde once the pursuer is close.

    Null action while range exceeds activation_range; at or inside it
    (inclusive boundary) a constant along-track prograde burn.
    """
    if observation.range <= activation_range:
        return EVADER_PROGRADE_BURN
    return COAST_THROTTLE


def build_observation(mission_time: float, pursuer: StateVector,
                      evader: StateVector) -> Observation:
    rel_pos_inertial = evader.position - pursuer.position
    rel_vel_inertial = evader.velocity - pursuer.velocity
    separation = float(np.linalg.norm(rel_pos_inertial))
    if separation > 0.0:
        range_rate = float(np.dot(rel_pos_inertial, rel_vel_inertial)) / separation
    else:
        range_rate = 0.0
    basis = np.stack(rsw_basis(pursuer))
    return Observation(
        mission_time=mission_time,
        pursuer_position=pursuer.position.copy(),
        pursuer_velocity=pursuer.velocity.copy(),
        evader_position=evader.position.copy(),
        evader_velocity=evader.velocity.copy(),
        relative_position=basis @ rel_pos_inertial,
        relative_velocity=basis @ rel_vel_inertial,
        range=separation,
        range_rate=range_rate,
    )


class PursuitEvasionEnv:
    """Single-episode pursuit-evasion environment.

    Single-owner: drive reset/step from one thread at a time. The pursuer's
    throttle arrives from the agent; the evader follows the built-in policy.
    """

    def __init__(self, scenario: Scenario, config: EnvironmentConfig = EnvironmentConfig()):
        self.scenario = scenario
        self.config = config
        self._pursuer: StateVector | None = None
        self._evader: StateVector | None = None
        self._time = 0.0
        self._terminated = False
        self._reason = TERMINATION_NONE
        self._last_observation: Observation | None = None

    @property
    def mission_time(self) -> float:
        return self._time

    @property
    def terminated(self) -> bool:
        return self._terminated

    @property
    def termination_reason(self) -> str:
        return self._reason

    @property
    def last_observation(self) -> Observation | None:
        return self._last_observation

    def reset(self) -> Observation:
        """Place both vessels at their scenario states and zero the clock."""
        report = verify_constraints(self.scenario)
        if not report.all_passed:
            raise InvalidScenarioError(report)
        body = self.scenario.body
        self._pursuer = elements_to_state(self.scenario.pursuer_elements, body)
        self._evader = elements_to_state(self.scenario.evader_elements, body)
        self._time = 0.0
        self._terminated = False
        self._reason = TERMINATION_NONE
        self._last_observation = build_observation(0.0, self._pursuer, self._evader)
        return self._last_observation

    def step(self, action: ThrottleVector) -> StepResult:
        """Advance one decision interval under the commanded pursuer throttle."""
        if self._last_observation is None:
            raise EpisodeFinishedError("environment must be reset before stepping")
        if self._terminated:
            raise EpisodeFinishedError("episode already terminated")

        cfg = self.config
        body = self.scenario.body
        evader_action = evader_policy(self._last_observation, cfg.evader_activation_range)

        impact = False
        try:
            self._pursuer = propagate_thrusted(
                self._pursuer, action.scaled(cfg.pursuer_max_accel),
                cfg.decision_interval, cfg.physics_substep, body)
        except ImpactError as err:
            self._pursuer = err.state
            impact = True
        try:
            self._evader = propagate_thrusted(
                self._evader, evader_action.scaled(cfg.evader_max_accel),
                cfg.decision_interval, cfg.physics_substep, body)
        except ImpactError as err:
            self._evader = err.state
            impact = True

        self._time += cfg.decision_interval
        observation = build_observation(self._time, self._pursuer, self._evader)
        self._last_observation = observation

        duration = self.scenario.constraints.mission_duration
        if impact:
            self._terminated = True
            self._reason = TERMINATION_IMPACT
        elif self._time >= duration - 1e-9:
            self._terminated = True
            self._reason = TERMINATION_TIME_LIMIT

        return StepResult(observation=observation, terminated=self._terminated,
                          termination_reason=self._reason)
