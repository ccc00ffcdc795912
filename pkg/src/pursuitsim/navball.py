"""Scripted pursuit bot that flies off navball-style target-relative cues.

The bot reads the line of sight and the target-relative prograde marker from
telemetry and applies a three-rule control law: accelerate toward the target
when the closing speed falls below a range-dependent schedule, otherwise
cancel its own lateral drift relative to the target (prograde alignment),
otherwise coast. It is intentionally a simple heuristic teacher whose logs
seed the fine-tuning dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .environment import Observation
from .llm import VerbalAction

RELATIVE_SPEED_EPSILON = 1e-9

# (axis index in RSW, sign) -> verbal action; axis 0 radial, 1 along-track,
# 2 cross-track, consistent with action_to_throttle.
_AXIS_ACTIONS = {
    (0, 1): VerbalAction.RIGHT,
    (0, -1): VerbalAction.LEFT,
    (1, 1): VerbalAction.FORWARD,
    (1, -1): VerbalAction.BACKWARD,
    (2, 1): VerbalAction.UP,
    (2, -1): VerbalAction.DOWN,
}


class NavballError(Exception):
    """Navball reading undefined for this geometry."""


@dataclass(frozen=True)
class NavballReading:
    """Target-relative cues in the pursuer's RSW frame."""

    target_direction: np.ndarray
    target_prograde: np.ndarray | None
    prograde_defined: bool
    range: float
    closing_speed: float


@dataclass(frozen=True)
class PursuitParams:
    """Approach-speed schedule and drift deadband for the pursuit law.

    speed_schedule maps range thresholds (m, descending) to commanded closing
    speeds (m/s); below the last threshold floor_speed applies. The profile
    must clear 2.7 km within the 240 s mission even while the evader burns
    away at 0.25 m/s^2, which pins the sustainable phase speeds well above a
    leisurely braking profile; the terminal floor stays low enough that 1 Hz
    sampling still catches a tight closest approach.
    """

    speed_schedule: tuple[tuple[float, float], ...] = (
        (1500.0, 20.0),
        (500.0, 14.0),
        (150.0, 8.0),
        (50.0, 4.0),
    )
    floor_speed: float = 2.0
    lateral_deadband: float = 0.5

    def target_speed(self, range_m: float) -> float:
        for threshold, speed in self.speed_schedule:
            if range_m > threshold:
                return speed
        return self.floor_speed


DEFAULT_PURSUIT = PursuitParams()


def compute_navball(observation: Observation) -> NavballReading:
    """Derive the navball cues from telemetry.

    Raises:
        NavballError: range is zero, so no line of sight exists.
    """
    if observation.range <= 0.0:
        raise NavballError("zero range: target direction undefined")
    target_direction = observation.relative_position / observation.range
    rel_speed = float(np.linalg.norm(observation.relative_velocity))
    if rel_speed > RELATIVE_SPEED_EPSILON:
        # Own velocity relative to the target: the navball's target-prograde marker.
        target_prograde = -observation.relative_velocity / rel_speed
        prograde_defined = True
    else:
        target_prograde = None
        prograde_defined = False
    return NavballReading(
        target_direction=target_direction,
        target_prograde=target_prograde,
        prograde_defined=prograde_defined,
        range=observation.range,
        closing_speed=-observation.range_rate,
    )


def _dominant_axis_action(vector: np.ndarray) -> VerbalAction:
    axis = int(np.argmax(np.abs(vector)))
    sign = 1 if vector[axis] >= 0.0 else -1
    return _AXIS_ACTIONS[(axis, sign)]


def decide(observation: Observation,
           params: PursuitParams = DEFAULT_PURSUIT) -> VerbalAction:
    """Pick one verbal action for the current telemetry.

    Rule 1: closing slower than the schedule allows -> thrust along the RSW
    axis holding the largest share of the line of sight, toward the target.
    Rule 2: own lateral velocity relative to the target above the deadband ->
    thrust along its dominant axis, opposing it, which drags the prograde
    marker onto the target. Rule 3: coast.
    """
    nav = compute_navball(observation)
    if nav.closing_speed < params.target_speed(nav.range):
        return _dominant_axis_action(nav.target_direction)

    # Pursuer velocity relative to the evader, lateral to the line of sight.
    own_rel_velocity = -observation.relative_velocity
    lateral = own_rel_velocity - np.dot(own_rel_velocity, nav.target_direction) \
        * nav.target_direction
    if float(np.linalg.norm(lateral)) > params.lateral_deadband:
        return _dominant_axis_action(-lateral)
    return VerbalAction.COAST


class NavballAgent:
    """Stateless decision wrapper with the shared agent interface."""

    def __init__(self, params: PursuitParams = DEFAULT_PURSUIT):
        self.params = params

    @property
    def meta(self) -> dict:
        return {"kind": "navball"}

    def decide(self, observation: Observation) -> VerbalAction:
        return decide(observation, self.params)
