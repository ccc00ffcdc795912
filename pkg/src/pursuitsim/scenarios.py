"""Randomized pursuer/evader orbit-pair generation under mission constraints.

The generator randomizes the pursuer's eccentricity, inclination, semimajor
axis, and true anomaly around the evader's orbit while keeping the longitude
of the ascending node and argument of periapsis identical to the evader's.
Sampling is shaped so the initial separation lands near the 2.7 km reference
distance and the initial relative speed stays small enough for a 240 s chase
to be feasible; the hard constraint box is still verified on every draw.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (
    DEFAULT_BODY,
    BodyConstants,
    OrbitalElements,
    elements_to_state,
    wrap_angle,
)

MAX_REJECTION_ATTEMPTS = 10_000

# Dispersion budget for feasible missions. The constraint box (e <= 0.1,
# |di| <= 5 deg) is far larger than what keeps two vessels within 3 km, so
# draws are confined to offsets whose position cost stays inside the
# separation goal and whose velocity cost stays correctable within the
# mission span; the full box is still checked by verify_constraints.
RADIAL_OFFSET_MAX = 250.0        # m
CROSS_OFFSET_MAX = 250.0         # m
RADIAL_SPEED_BUDGET = 6.0        # m/s, bounds sampled eccentricity
CROSS_SPEED_BUDGET = 5.0         # m/s, bounds sampled inclination delta
SEPARATION_GOAL_BAND = (-500.0, 300.0)  # m around the target distance


class GenerationError(Exception):
    """Constraint-satisfying scenario could not be generated."""


@dataclass(frozen=True)
class ScenarioConstraints:
    """Generation constraint box and mission parameters."""

    max_eccentricity: float = 0.1
    max_inclination_delta: float = math.radians(5.0)
    max_initial_distance: float = 3000.0
    target_initial_distance: float = 2700.0
    mission_duration: float = 240.0

    def __post_init__(self):
        for name in ("max_eccentricity", "max_inclination_delta", "max_initial_distance",
                     "target_initial_distance", "mission_duration"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.target_initial_distance > self.max_initial_distance:
            raise ValueError("target_initial_distance must not exceed max_initial_distance")


@dataclass(frozen=True)
class Scenario:
    """One pursuer/evader mission setup, reproducible from its seed."""

    pursuer_elements: OrbitalElements
    evader_elements: OrbitalElements
    seed: int
    body: BodyConstants = DEFAULT_BODY
    constraints: ScenarioConstraints = field(default_factory=ScenarioConstraints)


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    measured: float
    limit: float


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> list[ConstraintCheck]:
        return [check for check in self.checks if not check.passed]

    def summary(self) -> str:
        lines = []
        for check in self.checks:
            status = "ok" if check.passed else "FAIL"
            lines.append(f"{check.name}: {status} (measured {check.measured:.6g}, "
                         f"limit {check.limit:.6g})")
        return "\n".join(lines)


def default_evader_elements(body: BodyConstants = DEFAULT_BODY) -> OrbitalElements:
    """Reference evader orbit: circular, 150 km above the surface, i = 0.1 rad."""
    return OrbitalElements(
        semimajor_axis=body.surface_radius + 150_000.0,
        eccentricity=0.0,
        inclination=0.1,
        raan=0.0,
        arg_periapsis=0.0,
        true_anomaly=0.0,
    )


def split_seed(master_seed: int, index: int) -> int:
    """Derive a per-scenario seed from (master_seed, index).

    splitmix64 avalanche over master + (index+1) * golden-ratio increment;
    distinct indices always yield distinct seeds for a fixed master.
    """
    mask = (1 << 64) - 1
    z = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


def initial_separation(scenario: Scenario) -> float:
    """Distance between the two vessels at mission start (m)."""
    p = elements_to_state(scenario.pursuer_elements, scenario.body)
    e = elements_to_state(scenario.evader_elements, scenario.body)
    return float(np.linalg.norm(p.position - e.position))


def verify_constraints(scenario: Scenario) -> ConstraintReport:
    """Evaluate every scenario invariant independently and report measurements."""
    cons = scenario.constraints
    pursuer = scenario.pursuer_elements
    evader = scenario.evader_elements
    separation = initial_separation(scenario)
    incl_delta = abs(pursuer.inclination - evader.inclination)
    checks = (
        ConstraintCheck("initial_separation", separation <= cons.max_initial_distance,
                        separation, cons.max_initial_distance),
        ConstraintCheck("inclination_delta", incl_delta <= cons.max_inclination_delta,
                        incl_delta, cons.max_inclination_delta),
        ConstraintCheck("pursuer_eccentricity", pursuer.eccentricity <= cons.max_eccentricity,
                        pursuer.eccentricity, cons.max_eccentricity),
        ConstraintCheck("raan_equal", pursuer.raan == evader.raan,
                        pursuer.raan - evader.raan, 0.0),
        ConstraintCheck("arg_periapsis_equal", pursuer.arg_periapsis == evader.arg_periapsis,
                        pursuer.arg_periapsis - evader.arg_periapsis, 0.0),
    )
    return ConstraintReport(checks=checks)


def sample_scenario(evader_elements: OrbitalElements,
                    constraints: ScenarioConstraints,
                    seed: int,
                    body: BodyConstants = DEFAULT_BODY) -> Scenario:
    """Draw one constraint-satisfying scenario, deterministically from the seed.

    Rejection-samples up to 10,000 attempts; each draw picks a separation goal
    near the target distance, converts it into an along-track anomaly offset
    on the evader's orbit, and perturbs the pursuer's eccentricity,
    inclination, and semimajor axis within feasibility budgets.

    Raises:
        GenerationError: no draw satisfied the constraints (signals an
            inconsistent constraint box).
    """
    rng = np.random.default_rng(seed & ((1 << 64) - 1))
    evader_state = elements_to_state(evader_elements, body)
    r_evader = float(np.linalg.norm(evader_state.position))
    v_evader = float(np.linalg.norm(evader_state.velocity))

    goal_lo = max(1.0, constraints.target_initial_distance + SEPARATION_GOAL_BAND[0])
    goal_hi = min(constraints.max_initial_distance,
                  constraints.target_initial_distance + SEPARATION_GOAL_BAND[1])
    if goal_hi < goal_lo:
        raise GenerationError(
            f"separation goal bracket is empty for target "
            f"{constraints.target_initial_distance} m / max "
            f"{constraints.max_initial_distance} m; constraints are inconsistent")

    ecc_cap = min(constraints.max_eccentricity, RADIAL_SPEED_BUDGET / v_evader)
    incl_cap = min(constraints.max_inclination_delta, CROSS_SPEED_BUDGET / v_evader)

    for _ in range(MAX_REJECTION_ATTEMPTS):
        goal = rng.uniform(goal_lo, goal_hi)
        ahead = rng.integers(0, 2) == 1
        radial = rng.uniform(-1.0, 1.0) * min(RADIAL_OFFSET_MAX, goal / 6.0)
        cross = rng.uniform(-1.0, 1.0) * min(CROSS_OFFSET_MAX, goal / 6.0)
        ecc = rng.uniform(0.0, ecc_cap)
        incl_delta = rng.uniform(-1.0, 1.0) * incl_cap

        along = math.sqrt(max(goal * goal - radial * radial - cross * cross, 0.0))
        anomaly_offset = (along / r_evader) * (1.0 if ahead else -1.0)
        nu_pursuer = wrap_angle(evader_elements.true_anomaly + anomaly_offset)

        # Cross-track displacement from the plane tilt (about the shared node
        # line) at the pursuer's argument of latitude; fold the sampled cross
        # offset into the inclination delta when geometry allows.
        arg_lat = evader_elements.arg_periapsis + nu_pursuer
        tilt_lever = r_evader * math.sin(arg_lat)
        if abs(tilt_lever) > 1.0:
            incl_delta = max(-incl_cap, min(incl_cap, cross / tilt_lever))

        inclination = evader_elements.inclination + incl_delta
        if not 0.0 <= inclination <= math.pi:
            continue

        radius_goal = r_evader + radial
        semimajor = radius_goal * (1.0 + ecc * math.cos(nu_pursuer)) / (1.0 - ecc * ecc)
        if semimajor * (1.0 - ecc) <= body.surface_radius:
            continue

        pursuer = OrbitalElements(
            semimajor_axis=semimajor,
            eccentricity=ecc,
            inclination=inclination,
            raan=evader_elements.raan,
            arg_periapsis=evader_elements.arg_periapsis,
            true_anomaly=nu_pursuer,
        )
        scenario = Scenario(pursuer_elements=pursuer, evader_elements=evader_elements,
                            seed=seed, body=body, constraints=constraints)
        if verify_constraints(scenario).all_passed:
            return scenario

    raise GenerationError(
        f"no constraint-satisfying scenario within {MAX_REJECTION_ATTEMPTS} attempts "
        f"(seed {seed}); the constraint box is likely inconsistent")


def generate_batch(evader_elements: OrbitalElements,
                   constraints: ScenarioConstraints,
                   count: int,
                   master_seed: int,
                   body: BodyConstants = DEFAULT_BODY) -> list[Scenario]:
    """Generate `count` scenarios with per-scenario seeds split from master_seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [
        sample_scenario(evader_elements, constraints, split_seed(master_seed, i), body)
        for i in range(count)
    ]


# --- JSON interchange -------------------------------------------------------
# Schema: {seed, body:{mu, surface_radius}, constraints:{...},
#          pursuer:{a,e,i,raan,argp,nu}, evader:{...}}, SI units and radians.

def _elements_to_dict(elements: OrbitalElements) -> dict:
    return {
        "a": elements.semimajor_axis,
        "e": elements.eccentricity,
        "i": elements.inclination,
        "raan": elements.raan,
        "argp": elements.arg_periapsis,
        "nu": elements.true_anomaly,
    }


def _elements_from_dict(data: dict) -> OrbitalElements:
    return OrbitalElements(
        semimajor_axis=float(data["a"]),
        eccentricity=float(data["e"]),
        inclination=float(data["i"]),
        raan=float(data["raan"]),
        arg_periapsis=float(data["argp"]),
        true_anomaly=float(data["nu"]),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "seed": scenario.seed,
        "body": {"mu": scenario.body.mu, "surface_radius": scenario.body.surface_radius},
        "constraints": {
            "max_eccentricity": scenario.constraints.max_eccentricity,
            "max_inclination_delta": scenario.constraints.max_inclination_delta,
            "max_initial_distance": scenario.constraints.max_initial_distance,
            "target_initial_distance": scenario.constraints.target_initial_distance,
            "mission_duration": scenario.constraints.mission_duration,
        },
        "pursuer": _elements_to_dict(scenario.pursuer_elements),
        "evader": _elements_to_dict(scenario.evader_elements),
    }


def scenario_from_dict(data: dict) -> Scenario:
    cons = data["constraints"]
    return Scenario(
        pursuer_elements=_elements_from_dict(data["pursuer"]),
        evader_elements=_elements_from_dict(data["evader"]),
        seed=int(data["seed"]),
        body=BodyConstants(mu=float(data["body"]["mu"]),
                           surface_radius=float(data["body"]["surface_radius"])),
        constraints=ScenarioConstraints(
            max_eccentricity=float(cons["max_eccentricity"]),
            max_inclination_delta=float(cons["max_inclination_delta"]),
            max_initial_distance=float(cons["max_initial_distance"]),
            target_initial_distance=float(cons["target_initial_distance"]),
            mission_duration=float(cons["mission_duration"]),
        ),
    )


def scenario_to_json(scenario: Scenario) -> str:
    """Canonical (byte-stable) JSON serialization of one scenario."""
    return json.dumps(scenario_to_dict(scenario), sort_keys=True)


def scenario_from_json(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))


def save_scenarios(scenarios: list[Scenario], path: str | Path) -> None:
    """Write a batch file (JSON array) or a single scenario file."""
    path = Path(path)
    if len(scenarios) == 1:
        path.write_text(scenario_to_json(scenarios[0]) + "\n")
    else:
        body = ",\n".join(scenario_to_json(s) for s in scenarios)
        path.write_text("[\n" + body + "\n]\n")


def load_scenarios(path: str | Path) -> list[Scenario]:
    """Read a scenario file holding either one object or an array."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, list):
        return [scenario_from_dict(item) for item in data]
    return [scenario_from_dict(data)]
