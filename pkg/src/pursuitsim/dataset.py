"""Fine-tuning dataset builder: mission curation and chat-format JSONL export.

Converts episode logs into chat-completion training examples (system prompt,
telemetry user prompt with sliding history, assistant function call with a
templated chain-of-thought rationale) and curates the top-performing missions
by closest approach. Builds are byte-reproducible: ordering, tie-breaking,
and message formatting are all deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .episodes import EpisodeLog, closest_approach
from .llm import (
    SYSTEM_PROMPT,
    ContextWindow,
    VerbalAction,
    rationale_text,
    serialize_prompt,
)


@dataclass(frozen=True)
class MissionScore:
    """Closest recorded separation and when it happened."""

    closest_distance: float
    time_of_closest: float

    def __post_init__(self):
        if self.closest_distance < 0.0 or self.time_of_closest < 0.0:
            raise ValueError("mission scores are nonnegative")


@dataclass(frozen=True)
class ToolCallSpec:
    name: str
    arguments: dict


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    tool_call: ToolCallSpec | None = None


@dataclass(frozen=True)
class TrainingExample:
    """One chat exchange: system prompt, telemetry prompt, assistant action."""

    messages: tuple[Message, ...]

    def __post_init__(self):
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("first message must be the system prompt")
        final = self.messages[-1]
        if final.role != "assistant" or final.tool_call is None:
            raise ValueError("final message must be an assistant function call")


def score_mission(log: EpisodeLog) -> MissionScore:
    """Score one mission by its closest approach (distance, time)."""
    distance, time_of_closest = closest_approach(log)
    return MissionScore(closest_distance=distance, time_of_closest=time_of_closest)


def mean_closing_speed(log: EpisodeLog) -> float:
    """Average closing speed from start to closest approach (m/s); 0 if instant."""
    score = score_mission(log)
    samples = log.samples()
    start_range = samples[0][1]
    if score.time_of_closest <= 0.0:
        return 0.0
    return (start_range - score.closest_distance) / score.time_of_closest


def select_top_k(logs: list[EpisodeLog], k: int, rank_tie: str = "time") -> list[EpisodeLog]:
    """Pick the k best missions by closest distance.

    Ties resolve by earlier time of closest approach when rank_tie is "time"
    (the default) or by higher mean closing speed when "speed"; the log
    identifier is the final deterministic tie-break either way.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(logs):
        raise ValueError(f"k = {k} exceeds the number of logs ({len(logs)})")
    if rank_tie not in ("time", "speed"):
        raise ValueError(f"rank_tie must be 'time' or 'speed', got {rank_tie!r}")

    def key(log: EpisodeLog):
        score = score_mission(log)
        if rank_tie == "time":
            return (score.closest_distance, score.time_of_closest, log.log_id)
        return (score.closest_distance, -mean_closing_speed(log), log.log_id)

    return sorted(logs, key=key)[:k]


def log_to_examples(log: EpisodeLog, window_capacity: int = 0,
                    profile: str = "agnostic",
                    system_prompt: str = SYSTEM_PROMPT) -> list[TrainingExample]:
    """Convert one mission log into training examples, one per retained step.

    Each example's user prompt is the telemetry the agent saw before acting
    (the previous record's state, or the initial state for the first step)
    serialized with a sliding window over the previously retained actions.
    Failed turns are skipped and do not enter later windows.

    Raises:
        ValueError: a retained step carries no verbal action (throttle-only
            logs cannot be converted).
    """
    if log.initial is None:
        raise ValueError("log has no initial state; cannot reconstruct prompts")
    examples = []
    window = ContextWindow(window_capacity)
    previous_observation = log.initial
    for index, step in enumerate(log.steps):
        seen = previous_observation
        previous_observation = step.observation
        if step.agent.failed:
            continue
        if step.agent.verbal not in set(a.value for a in VerbalAction):
            raise ValueError(
                f"step {index + 1} carries no verbal action ({step.agent.verbal!r})")
        action = VerbalAction(step.agent.verbal)
        prompt = serialize_prompt(seen, window, profile)
        rationale = step.agent.rationale or rationale_text(seen, action)
        examples.append(TrainingExample(messages=(
            Message(role="system", content=system_prompt),
            Message(role="user", content=prompt),
            Message(role="assistant", content=rationale,
                    tool_call=ToolCallSpec(name="perform_action",
                                           arguments={"direction": action.value})),
        )))
        window.push(seen.range, action)
    return examples


def build_dataset(logs: list[EpisodeLog], top_k: int, window_capacity: int = 0,
                  profile: str = "agnostic", rank_tie: str = "time") -> list[TrainingExample]:
    """Curate the top missions and concatenate their examples in rank order."""
    selected = select_top_k(logs, top_k, rank_tie=rank_tie)
    examples = []
    for log in selected:
        examples.extend(log_to_examples(log, window_capacity, profile))
    return examples


# --- JSONL interchange --------------------------------------------------------

def _message_to_dict(message: Message) -> dict:
    data: dict = {"role": message.role, "content": message.content}
    if message.tool_call is not None:
        data["tool_calls"] = [{
            "id": "call_0",
            "type": "function",
            "function": {
                "name": message.tool_call.name,
                "arguments": json.dumps(message.tool_call.arguments, sort_keys=True),
            },
        }]
    return data


def _message_from_dict(data: dict) -> Message:
    tool_call = None
    calls = data.get("tool_calls")
    if calls:
        function = calls[0]["function"]
        tool_call = ToolCallSpec(name=function["name"],
                                 arguments=json.loads(function["arguments"]))
    return Message(role=data["role"], content=data.get("content", ""),
                   tool_call=tool_call)


def example_to_dict(example: TrainingExample) -> dict:
    return {"messages": [_message_to_dict(m) for m in example.messages]}


def example_from_dict(data: dict) -> TrainingExample:
    return TrainingExample(messages=tuple(_message_from_dict(m)
                                          for m in data["messages"]))


def export_jsonl(examples: list[TrainingExample], destination: str | Path) -> None:
    """Write chat-format JSONL, one {"messages": [...]} object per line."""
    destination = Path(destination)
    try:
        with destination.open("w") as handle:
            for example in examples:
                handle.write(json.dumps(example_to_dict(example), sort_keys=True) + "\n")
    except OSError as err:
        raise OSError(f"failed to write dataset to {destination}: {err}") from err


def import_jsonl(source: str | Path) -> list[TrainingExample]:
    """Read a chat-format JSONL file back into training examples."""
    source = Path(source)
    try:
        text = source.read_text()
    except OSError as err:
        raise OSError(f"failed to read dataset from {source}: {err}") from err
    examples = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            examples.append(example_from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as err:
            raise ValueError(f"{source}:{line_number}: malformed example: {err}") from err
    return examples
