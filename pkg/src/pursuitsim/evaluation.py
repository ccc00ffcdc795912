"""Evaluation harness: drive agents over scenario batches, aggregate metrics.

Episodes are independent and may run on a worker pool; aggregation is a
deterministic fold in scenario order, so distance and failure metrics are
identical at any worker count (latency is wall-clock and excluded from
reproducibility guarantees).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .environment import EnvironmentConfig, PursuitEvasionEnv, ThrottleVector
from .episodes import AgentTurnRecord, EpisodeLog, StepRecord
from .llm import AgentTurn, VerbalAction, action_to_throttle, rationale_text, throttle_to_action
from .scenarios import Scenario

REPORT_SCHEMA_VERSION = "evaluation-report-v1"


class EvaluationError(Exception):
    """An episode failed; carries partial results for diagnostics."""

    def __init__(self, message: str, completed: list["PerEpisodeResult"]):
        super().__init__(message)
        self.completed = completed


class CoastAgent:
    """Null agent: always coasts."""

    @property
    def meta(self) -> dict:
        return {"kind": "coast"}

    def decide(self, observation) -> VerbalAction:
        return VerbalAction.COAST


class SequenceAgent:
    """Replays a fixed list of verbal actions or throttle vectors."""

    def __init__(self, actions):
        self.actions = list(actions)
        self._index = 0

    @property
    def meta(self) -> dict:
        return {"kind": "sequence", "length": len(self.actions)}

    @property
    def exhausted(self) -> bool:
        return self._index >= len(self.actions)

    def decide(self, observation):
        action = self.actions[self._index]
        self._index += 1
        return action


def _normalize_decision(decision) -> tuple[ThrottleVector, AgentTurnRecord]:
    """Map any agent decision form onto (throttle, log record)."""
    if isinstance(decision, AgentTurn):
        executed = decision.parsed_action if decision.parsed_action is not None \
            else VerbalAction.COAST
        return action_to_throttle(executed), AgentTurnRecord(
            verbal=executed.value,
            rationale=decision.rationale,
            latency_ms=decision.latency_ms,
            failed=decision.failed,
        )
    if isinstance(decision, ThrottleVector):
        word = throttle_to_action(decision)
        return decision, AgentTurnRecord(verbal=word.value if word else "")
    action = VerbalAction(decision)
    return action_to_throttle(action), AgentTurnRecord(verbal=action.value)


def run_episode(scenario: Scenario, agent,
                config: EnvironmentConfig = EnvironmentConfig(),
                log_id: str | None = None,
                record_rationale: bool = True) -> EpisodeLog:
    """Drive reset/step to termination, recording every turn and observation.

    Works with any agent whose decide(observation) returns a VerbalAction,
    a ThrottleVector, or a full AgentTurn. Scripted decisions get a templated
    rationale when record_rationale is set, so bot logs are usable as
    training data as-is.
    """
    env = PursuitEvasionEnv(scenario, config)
    observation = env.reset()
    log = EpisodeLog(
        log_id=log_id or f"seed-{scenario.seed}",
        scenario=scenario,
        initial=observation,
        steps=[],
        agent_meta=getattr(agent, "meta", {"kind": type(agent).__name__}),
    )
    # Raw sequence replays mirror service-driven logs and must match them
    # bit for bit, so they never get synthesized rationale text.
    if isinstance(agent, SequenceAgent):
        record_rationale = False
    while not env.terminated:
        if isinstance(agent, SequenceAgent) and agent.exhausted:
            break
        decision = agent.decide(observation)
        throttle, record = _normalize_decision(decision)
        if record_rationale and not record.rationale and record.verbal \
                and not isinstance(decision, AgentTurn):
            record = AgentTurnRecord(
                verbal=record.verbal,
                rationale=rationale_text(observation, VerbalAction(record.verbal)),
                latency_ms=record.latency_ms,
                failed=record.failed,
            )
        result = env.step(throttle)
        observation = result.observation
        log.steps.append(StepRecord(observation=observation, action=throttle,
                                    agent=record))
    log.termination_reason = env.termination_reason
    return log


@dataclass(frozen=True)
class PerEpisodeResult:
    scenario_seed: int
    closest_distance: float
    time_of_closest: float
    failure_count: int
    turn_count: int


@dataclass(frozen=True)
class EvaluationReport:
    """Aggregated distance / failure-rate / latency metrics over a batch."""

    method_name: str
    best_distance: float
    average_distance: float
    worst_distance: float
    failure_rate: float
    average_latency_ms: float
    episode_count: int
    per_episode: tuple[PerEpisodeResult, ...]

    def __post_init__(self):
        if not self.best_distance <= self.average_distance <= self.worst_distance:
            raise ValueError("distance aggregates must satisfy best <= average <= worst")

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "method_name": self.method_name,
            "best_distance": self.best_distance,
            "average_distance": self.average_distance,
            "worst_distance": self.worst_distance,
            "failure_rate": self.failure_rate,
            "average_latency_ms": self.average_latency_ms,
            "episode_count": self.episode_count,
            "per_episode": [
                {
                    "scenario_seed": r.scenario_seed,
                    "closest_distance": r.closest_distance,
                    "time_of_closest": r.time_of_closest,
                    "failure_count": r.failure_count,
                    "turn_count": r.turn_count,
                }
                for r in self.per_episode
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "EvaluationReport":
        return EvaluationReport(
            method_name=data["method_name"],
            best_distance=float(data["best_distance"]),
            average_distance=float(data["average_distance"]),
            worst_distance=float(data["worst_distance"]),
            failure_rate=float(data["failure_rate"]),
            average_latency_ms=float(data["average_latency_ms"]),
            episode_count=int(data["episode_count"]),
            per_episode=tuple(
                PerEpisodeResult(
                    scenario_seed=int(r["scenario_seed"]),
                    closest_distance=float(r["closest_distance"]),
                    time_of_closest=float(r["time_of_closest"]),
                    failure_count=int(r["failure_count"]),
                    turn_count=int(r["turn_count"]),
                )
                for r in data["per_episode"]
            ),
        )


def aggregate_report(method_name: str, results: list[PerEpisodeResult],
                     latencies_ms: list[float]) -> EvaluationReport:
    """Fold per-episode results into a report (exact min/mean/max identities)."""
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    distances = [r.closest_distance for r in results]
    total_turns = sum(r.turn_count for r in results)
    total_failures = sum(r.failure_count for r in results)
    return EvaluationReport(
        method_name=method_name,
        best_distance=min(distances),
        average_distance=sum(distances) / len(distances),
        worst_distance=max(distances),
        failure_rate=(total_failures / total_turns) if total_turns else 0.0,
        average_latency_ms=(sum(latencies_ms) / len(latencies_ms)) if latencies_ms else 0.0,
        episode_count=len(results),
        per_episode=tuple(results),
    )


def evaluate(scenarios: list[Scenario], agent_factory,
             config: EnvironmentConfig = EnvironmentConfig(),
             workers: int = 1, method_name: str = "agent") -> EvaluationReport:
    """Run one agent over every scenario and aggregate the metrics.

    agent_factory is called once per episode so stateful pipelines (sliding
    windows) start fresh. Any episode error aborts the evaluation with the
    completed episodes attached for diagnostics.
    """
    if not scenarios:
        raise ValueError("need at least one scenario")
    from .episodes import closest_approach

    def run_one(indexed):
        index, scenario = indexed
        log = run_episode(scenario, agent_factory(), config,
                          log_id=f"ep-{index:04d}-seed-{scenario.seed}")
        distance, t_closest = closest_approach(log)
        failures = sum(1 for s in log.steps if s.agent.failed)
        latencies = [s.agent.latency_ms for s in log.steps]
        return index, PerEpisodeResult(
            scenario_seed=scenario.seed,
            closest_distance=distance,
            time_of_closest=t_closest,
            failure_count=failures,
            turn_count=len(log.steps),
        ), latencies

    outcomes: list = [None] * len(scenarios)
    completed: list[PerEpisodeResult] = []
    try:
        if workers <= 1:
            for item in enumerate(scenarios):
                index, result, latencies = run_one(item)
                outcomes[index] = (result, latencies)
                completed.append(result)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for index, result, latencies in pool.map(run_one, enumerate(scenarios)):
                    outcomes[index] = (result, latencies)
                    completed.append(result)
    except Exception as err:
        if isinstance(err, EvaluationError):
            raise
        raise EvaluationError(
            f"episode failed after {len(completed)} completed: {err}",
            completed=completed) from err

    results = [outcome[0] for outcome in outcomes]
    latencies_ms = [latency for outcome in outcomes for latency in outcome[1]]
    return aggregate_report(method_name, results, latencies_ms)


def render_report(report: EvaluationReport, format: str = "table") -> str:
    """Render a report as an aligned text table, JSON, or CSV."""
    if format == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2)
    if format == "csv":
        lines = ["scenario_seed,closest_distance,time_of_closest,failure_count,turn_count"]
        for r in report.per_episode:
            lines.append(f"{r.scenario_seed},{r.closest_distance!r},"
                         f"{r.time_of_closest!r},{r.failure_count},{r.turn_count}")
        return "\n".join(lines) + "\n"
    if format == "table":
        header = (f"{'Method':<24} {'Distance (m)':>36} {'Failure Rate':>13} "
                  f"{'Average Latency (ms)':>22}")
        subheader = (f"{'':<24} {'Best':>12} {'Average':>11} {'Worst':>11} "
                     f"{'':>13} {'':>22}")
        row = (f"{report.method_name:<24} {report.best_distance:>12.2f} "
               f"{report.average_distance:>11.2f} {report.worst_distance:>11.2f} "
               f"{report.failure_rate:>12.1%} {report.average_latency_ms:>22.2f}")
        footer = f"episodes: {report.episode_count}"
        return "\n".join([header, subheader, row, footer])
    raise ValueError(f"unknown format {format!r}")


def report_from_json(text: str) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(text))
