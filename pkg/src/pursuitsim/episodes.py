"""Episode logs: per-step records, JSON-lines / CSV serialization, scoring.

A serialized log is one header line carrying the scenario, agent metadata,
and the initial (t=0) state, followed by exactly one JSON record per step:
{t, pursuer:{r, v}, evader:{r, v}, range, range_rate, action:{r, s, w},
agent:{verbal, rationale, latency_ms, failed}}. Step records hold the
post-step state together with the action that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import StateVector
from .environment import Observation, ThrottleVector, build_observation
from .scenarios import Scenario, scenario_from_dict, scenario_to_dict

LOG_SCHEMA_VERSION = "episode-log-v1"


class EmptyLogError(Exception):
    """Operation requires a log with at least one range sample."""


@dataclass(frozen=True)
class AgentTurnRecord:
    """Agent bookkeeping attached to one step."""

    verbal: str
    rationale: str = ""
    latency_ms: float = 0.0
    failed: bool = False


@dataclass(frozen=True)
class StepRecord:
    """Post-step telemetry plus the action applied over the step."""

    observation: Observation
    action: ThrottleVector
    agent: AgentTurnRecord


@dataclass
class EpisodeLog:
    """Full trajectory and agent transcript of one mission."""

    log_id: str
    scenario: Scenario | None
    initial: Observation | None
    steps: list[StepRecord] = field(default_factory=list)
    termination_reason: str = "none"
    agent_meta: dict = field(default_factory=dict)

    def samples(self) -> list[tuple[float, float]]:
        """(time, range) pairs: the initial state, then every step."""
        out = []
        if self.initial is not None:
            out.append((self.initial.mission_time, self.initial.range))
        out.extend((s.observation.mission_time, s.observation.range) for s in self.steps)
        return out


def closest_approach(log: EpisodeLog) -> tuple[float, float]:
    """Minimum recorded range and its timestamp; ties resolve to the earliest.

    Raises:
        EmptyLogError: log has no samples.
    """
    samples = log.samples()
    if not samples:
        raise EmptyLogError("episode log has no recorded samples")
    best_time, best_range = samples[0]
    for t, r in samples[1:]:
        if r < best_range:
            best_range, best_time = r, t
    return best_range, best_time


def _state_dict(observation: Observation) -> tuple[dict, dict]:
    pursuer = {"r": [float(x) for x in observation.pursuer_position],
               "v": [float(x) for x in observation.pursuer_velocity]}
    evader = {"r": [float(x) for x in observation.evader_position],
              "v": [float(x) for x in observation.evader_velocity]}
    return pursuer, evader


def step_record_to_dict(record: StepRecord) -> dict:
    pursuer, evader = _state_dict(record.observation)
    return {
        "t": record.observation.mission_time,
        "pursuer": pursuer,
        "evader": evader,
        "range": record.observation.range,
        "range_rate": record.observation.range_rate,
        "action": {"r": record.action.radial, "s": record.action.along_track,
                   "w": record.action.cross_track},
        "agent": {
            "verbal": record.agent.verbal,
            "rationale": record.agent.rationale,
            "latency_ms": record.agent.latency_ms,
            "failed": record.agent.failed,
        },
    }


def header_to_dict(log: EpisodeLog) -> dict:
    header = {
        "schema": LOG_SCHEMA_VERSION,
        "log_id": log.log_id,
        "termination_reason": log.termination_reason,
        "agent_meta": log.agent_meta,
        "scenario": scenario_to_dict(log.scenario) if log.scenario else None,
    }
    if log.initial is not None:
        pursuer, evader = _state_dict(log.initial)
        header["initial"] = {
            "t": log.initial.mission_time,
            "pursuer": pursuer,
            "evader": evader,
            "range": log.initial.range,
            "range_rate": log.initial.range_rate,
        }
    else:
        header["initial"] = None
    return header


def log_to_jsonl(log: EpisodeLog) -> str:
    """Serialize header plus one line per step; byte-stable for equal logs."""
    lines = [json.dumps(header_to_dict(log), sort_keys=True)]
    lines.extend(json.dumps(step_record_to_dict(s), sort_keys=True) for s in log.steps)
    return "\n".join(lines) + "\n"


def _observation_from_log_state(t: float, pursuer: dict, evader: dict) -> Observation:
    """Rebuild a full Observation from logged inertial states."""
    return build_observation(
        t,
        StateVector(position=np.array(pursuer["r"]), velocity=np.array(pursuer["v"]),
                    epoch=t),
        StateVector(position=np.array(evader["r"]), velocity=np.array(evader["v"]),
                    epoch=t),
    )


def log_from_jsonl(text: str) -> EpisodeLog:
    """Parse a serialized log; raises ValueError with line context on bad input."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty episode log")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise ValueError(f"line 1: invalid JSON: {err}") from err
    if header.get("schema") != LOG_SCHEMA_VERSION:
        raise ValueError(f"line 1: expected header with schema {LOG_SCHEMA_VERSION!r}")

    scenario = scenario_from_dict(header["scenario"]) if header.get("scenario") else None
    initial = None
    if header.get("initial"):
        init = header["initial"]
        initial = _observation_from_log_state(init["t"], init["pursuer"], init["evader"])

    steps = []
    for line_number, line in enumerate(lines[1:], start=2):
        try:
            data = json.loads(line)
            observation = _observation_from_log_state(data["t"], data["pursuer"],
                                                      data["evader"])
            action = ThrottleVector(radial=int(data["action"]["r"]),
                                    along_track=int(data["action"]["s"]),
                                    cross_track=int(data["action"]["w"]))
            agent = AgentTurnRecord(
                verbal=data["agent"]["verbal"],
                rationale=data["agent"]["rationale"],
                latency_ms=float(data["agent"]["latency_ms"]),
                failed=bool(data["agent"]["failed"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            raise ValueError(f"line {line_number}: malformed step record: {err}") from err
        steps.append(StepRecord(observation=observation, action=action, agent=agent))

    return EpisodeLog(
        log_id=header.get("log_id", ""),
        scenario=scenario,
        initial=initial,
        steps=steps,
        termination_reason=header.get("termination_reason", "none"),
        agent_meta=header.get("agent_meta", {}),
    )


def write_log(log: EpisodeLog, path: str | Path) -> None:
    Path(path).write_text(log_to_jsonl(log))


def read_log(path: str | Path) -> EpisodeLog:
    return log_from_jsonl(Path(path).read_text())


def export_trajectory_csv(log: EpisodeLog, path: str | Path) -> None:
    """Trajectory-only CSV (t, pursuer xyz, evader xyz) for external plotting."""
    rows = ["t,pursuer_x,pursuer_y,pursuer_z,evader_x,evader_y,evader_z"]
    observations = ([] if log.initial is None else [log.initial])
    observations += [s.observation for s in log.steps]
    for obs in observations:
        px, py, pz = (float(x) for x in obs.pursuer_position)
        ex, ey, ez = (float(x) for x in obs.evader_position)
        rows.append(f"{obs.mission_time!r},{px!r},{py!r},{pz!r},{ex!r},{ey!r},{ez!r}")
    Path(path).write_text("\n".join(rows) + "\n")
