"""Language-agent plumbing: prompts, function-call parsing, chat client.

Covers the text half of the agent loop: serializing telemetry into prompts
with a sliding action-history window, an OpenAI-compatible chat-completions
client, parsing of perform_action function calls back into verbal actions,
the verbal-to-throttle mapping, and a scripted backend that serves any
deterministic policy over the same wire format for LLM-free testing.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import requests

from .environment import Observation, ThrottleVector


class VerbalAction(str, Enum):
    """The agent's action vocabulary: six thrust words plus an explicit no-op."""

    FORWARD = "forward"
    BACKWARD = "backward"
    RIGHT = "right"
    LEFT = "left"
    UP = "up"
    DOWN = "down"
    COAST = "coast"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


ACTION_WORDS = tuple(action.value for action in VerbalAction)

_ACTION_TO_THROTTLE = {
    VerbalAction.FORWARD: ThrottleVector(0, 1, 0),
    VerbalAction.BACKWARD: ThrottleVector(0, -1, 0),
    VerbalAction.RIGHT: ThrottleVector(1, 0, 0),
    VerbalAction.LEFT: ThrottleVector(-1, 0, 0),
    VerbalAction.UP: ThrottleVector(0, 0, 1),
    VerbalAction.DOWN: ThrottleVector(0, 0, -1),
    VerbalAction.COAST: ThrottleVector(0, 0, 0),
}

_THROTTLE_TO_ACTION = {
    (t.radial, t.along_track, t.cross_track): a for a, t in _ACTION_TO_THROTTLE.items()
}


def action_to_throttle(action: VerbalAction) -> ThrottleVector:
    """Map a verbal action onto per-axis throttle (radial, along-track, cross-track)."""
    return _ACTION_TO_THROTTLE[VerbalAction(action)]


def throttle_to_action(throttle: ThrottleVector) -> VerbalAction | None:
    """Inverse mapping; None for multi-axis throttles that have no single word."""
    return _THROTTLE_TO_ACTION.get(
        (throttle.radial, throttle.along_track, throttle.cross_track))


@dataclass(frozen=True)
class WindowEntry:
    range_m: float
    action: VerbalAction


class ContextWindow:
    """FIFO sliding window of the last `capacity` (range, action) pairs."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self._entries: deque[WindowEntry] = deque(maxlen=capacity)

    def push(self, range_m: float, action: VerbalAction) -> None:
        self._entries.append(WindowEntry(range_m=range_m, action=VerbalAction(action)))

    def entries(self) -> list[WindowEntry]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


PROMPT_PROFILES = ("agnostic", "hinted")
PROMPT_PROFILE_VERSIONS = {"agnostic": "agnostic-v1", "hinted": "hinted-v1"}

SYSTEM_PROMPT = (
    "You are the autonomous pilot of a pursuit spacecraft. Each turn you "
    "receive the mission telemetry as text. Reply by calling the function "
    "perform_action with a single direction chosen from: forward, backward, "
    "right, left, up, down, coast. Axes are the vessel's local orbital frame: "
    "forward/backward along-track, right/left radial, up/down cross-track. "
    "Briefly justify the choice in the message content."
)

HINT_PARAGRAPH = (
    "Hint: keep the closing speed positive but moderate, slow down as the "
    "range shrinks, and cancel sideways drift so the target stays centered."
)

PERFORM_ACTION_TOOL = {
    "type": "function",
    "function": {
        "name": "perform_action",
        "description": "Fire the spacecraft thrusters in one body-frame direction "
                       "for the next decision interval, or coast.",
        "parameters": {
            "type": "object",
            "properties": {
                "direction": {
                    "type": "string",
                    "enum": list(ACTION_WORDS),
                    "description": "Thrust direction for this interval.",
                },
            },
            "required": ["direction"],
        },
    },
}


def serialize_prompt(observation: Observation, window: ContextWindow | None = None,
                     profile: str = "agnostic") -> str:
    """Render telemetry (and the action history window) as a deterministic prompt.

    Fixed field order and fixed 2-decimal formatting; the history section is
    omitted entirely when the window is empty.
    """
    if profile not in PROMPT_PROFILES:
        raise ValueError(f"unknown prompt profile {profile!r}")
    rel_p = observation.relative_position
    rel_v = observation.relative_velocity
    lines = [
        f"Mission time: {observation.mission_time:.2f} s",
        (f"Relative position RSW (m): radial {rel_p[0]:.2f}, "
         f"along-track {rel_p[1]:.2f}, cross-track {rel_p[2]:.2f}"),
        (f"Relative velocity RSW (m/s): radial {rel_v[0]:.2f}, "
         f"along-track {rel_v[1]:.2f}, cross-track {rel_v[2]:.2f}"),
        f"Range (m): {observation.range:.2f}",
        f"Range rate (m/s): {observation.range_rate:.2f}",
    ]
    if profile == "hinted":
        lines.append(HINT_PARAGRAPH)
    if window is not None and len(window) > 0:
        lines.append("Previous actions (oldest first):")
        for entry in window.entries():
            lines.append(f"- {entry.action.value} at range {entry.range_m:.2f} m")
    return "\n".join(lines)


def rationale_text(observation: Observation, action: VerbalAction) -> str:
    """Deterministic chain-of-thought paragraph for an action at a telemetry state."""
    action = VerbalAction(action)
    trend = "closing" if observation.range_rate < 0.0 else "opening"
    rate = abs(observation.range_rate)
    if action is VerbalAction.COAST:
        choice = "coasting: the approach geometry needs no correction this interval"
    else:
        axis = {"forward": "along-track +", "backward": "along-track -",
                "right": "radial +", "left": "radial -",
                "up": "cross-track +", "down": "cross-track -"}[action.value]
        choice = f"thrusting {action.value} ({axis}) to shape the intercept"
    return (f"Range is {observation.range:.2f} m and {trend} at {rate:.2f} m/s; "
            f"{choice}.")


# --- Response parsing --------------------------------------------------------

FAILURE_NO_CALL = "no_call"
FAILURE_BAD_NAME = "bad_name"
FAILURE_BAD_ARGS = "bad_args"
FAILURE_BAD_VALUE = "bad_value"


@dataclass(frozen=True)
class ParseFailure:
    category: str
    detail: str = ""


def _triplet_to_action(args: dict) -> VerbalAction | ParseFailure:
    """Map the legacy throttle-triplet form {ft, rt, dt} to a verbal action.

    ft is the forward (along-track) throttle, rt the rightward (radial)
    throttle, dt the downward (cross-track) throttle; each must be -1, 0,
    or +1 and at most one may be nonzero.
    """
    try:
        ft, rt, dt = int(args["ft"]), int(args["rt"]), int(args["dt"])
    except (KeyError, TypeError, ValueError):
        return ParseFailure(FAILURE_BAD_ARGS, "triplet fields must be integers")
    for value in (ft, rt, dt):
        if value not in (-1, 0, 1):
            return ParseFailure(FAILURE_BAD_VALUE, f"throttle component {value} not in -1/0/1")
    nonzero = sum(1 for value in (ft, rt, dt) if value != 0)
    if nonzero > 1:
        return ParseFailure(FAILURE_BAD_VALUE, "multiple nonzero throttle components")
    if ft != 0:
        return VerbalAction.FORWARD if ft > 0 else VerbalAction.BACKWARD
    if rt != 0:
        return VerbalAction.RIGHT if rt > 0 else VerbalAction.LEFT
    if dt != 0:
        return VerbalAction.DOWN if dt > 0 else VerbalAction.UP
    return VerbalAction.COAST


def parse_response(response: dict) -> tuple[VerbalAction, str] | ParseFailure:
    """Extract (action, rationale) from a chat-completion response.

    Accepts a perform_action call carrying either {"direction": <word>} or
    the throttle-triplet form {"ft", "rt", "dt"}. Anything else is a
    ParseFailure value (never an exception) with a category from
    no_call / bad_name / bad_args / bad_value.
    """
    try:
        message = response["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        return ParseFailure(FAILURE_NO_CALL, "response has no message")
    rationale = message.get("content") or ""
    tool_calls = message.get("tool_calls") or []
    if not tool_calls:
        return ParseFailure(FAILURE_NO_CALL, "no tool call in response")
    function = tool_calls[0].get("function") or {}
    name = function.get("name")
    if name != "perform_action":
        return ParseFailure(FAILURE_BAD_NAME, f"unexpected function {name!r}")
    raw_args = function.get("arguments", "{}")
    if isinstance(raw_args, str):
        try:
            args = json.loads(raw_args)
        except json.JSONDecodeError as err:
            return ParseFailure(FAILURE_BAD_ARGS, f"arguments not valid JSON: {err}")
    elif isinstance(raw_args, dict):
        args = raw_args
    else:
        return ParseFailure(FAILURE_BAD_ARGS, "arguments neither string nor object")
    if not isinstance(args, dict):
        return ParseFailure(FAILURE_BAD_ARGS, "arguments did not decode to an object")

    if "direction" in args:
        word = args["direction"]
        if isinstance(word, str) and word in ACTION_WORDS:
            return VerbalAction(word), rationale
        return ParseFailure(FAILURE_BAD_VALUE, f"unknown direction {word!r}")
    if {"ft", "rt", "dt"} <= set(args):
        result = _triplet_to_action(args)
        if isinstance(result, ParseFailure):
            return result
        return result, rationale
    return ParseFailure(FAILURE_BAD_ARGS, "missing direction or throttle triplet")


# --- Chat-completions client -------------------------------------------------

TRANSPORT_TIMEOUT = "timeout"
TRANSPORT_CONNECT = "connect"
TRANSPORT_HTTP_STATUS = "http_status"
TRANSPORT_MALFORMED = "malformed"


@dataclass(frozen=True)
class TransportFailure:
    category: str
    detail: str = ""


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach the chat-completions backend."""

    base_url: str
    model: str = "local"
    api_key: str | None = None
    timeout_s: float = 30.0
    attach_observation: bool = False


@dataclass(frozen=True)
class CompletionResult:
    response: dict | None
    failure: TransportFailure | None
    latency_ms: float

    @property
    def ok(self) -> bool:
        return self.failure is None


def complete(messages: list[dict], tools: list[dict], config: EndpointConfig,
             observation: Observation | None = None) -> CompletionResult:
    """POST one chat-completions request and time it.

    Transport problems (timeout, refused connection, non-2xx status,
    unparseable body) come back as TransportFailure values, each under its
    own category, with the measured wall-clock latency.
    """
    payload = {
        "model": config.model,
        "messages": messages,
        "tools": tools,
        "tool_choice": {"type": "function", "function": {"name": "perform_action"}},
    }
    if config.attach_observation and observation is not None:
        payload["observation"] = observation.to_dict()
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    url = config.base_url.rstrip("/") + "/v1/chat/completions"

    start = time.perf_counter()
    try:
        http_response = requests.post(url, json=payload, headers=headers,
                                      timeout=config.timeout_s)
    except requests.exceptions.Timeout:
        latency = (time.perf_counter() - start) * 1000.0
        return CompletionResult(None, TransportFailure(TRANSPORT_TIMEOUT, url), latency)
    except requests.exceptions.RequestException as err:
        latency = (time.perf_counter() - start) * 1000.0
        return CompletionResult(None, TransportFailure(TRANSPORT_CONNECT, str(err)), latency)
    latency = (time.perf_counter() - start) * 1000.0

    if not 200 <= http_response.status_code < 300:
        return CompletionResult(
            None,
            TransportFailure(TRANSPORT_HTTP_STATUS,
                             f"status {http_response.status_code}"),
            latency)
    try:
        body = http_response.json()
    except ValueError as err:
        return CompletionResult(None, TransportFailure(TRANSPORT_MALFORMED, str(err)),
                                latency)
    return CompletionResult(body, None, latency)


# --- Agent turn record -------------------------------------------------------

@dataclass(frozen=True)
class AgentTurn:
    """One full language-agent exchange."""

    prompt_text: str
    response_text: str
    parsed_action: VerbalAction | None
    rationale: str
    latency_ms: float
    failed: bool
    failure_category: str = ""

    def __post_init__(self):
        if self.failed != (self.parsed_action is None):
            raise ValueError("failed flag must match parsed_action presence")
        if self.latency_ms < 0.0:
            raise ValueError("latency must be >= 0")


# --- Scripted backend (policy-wrapping test double) --------------------------

def build_tool_call_response(action: VerbalAction, rationale: str,
                             model: str = "scripted") -> dict:
    """A well-formed chat-completion response carrying one perform_action call."""
    return {
        "id": "chatcmpl-scripted",
        "object": "chat.completion",
        "model": model,
        "choices": [{
            "index": 0,
            "message": {
                "role": "assistant",
                "content": rationale,
                "tool_calls": [{
                    "id": "call_0",
                    "type": "function",
                    "function": {
                        "name": "perform_action",
                        "arguments": json.dumps({"direction": action.value}),
                    },
                }],
            },
            "finish_reason": "tool_calls",
        }],
    }


class ScriptedBackend:
    """Chat-completions double that answers with a wrapped policy's action.

    The acting observation is re-derived from the structured side-channel the
    client attaches to the request, never from the prompt prose, so wrapping
    a policy reproduces its decisions exactly. An optional injected failure
    rate replaces responses with call-free messages for failure-accounting
    tests.
    """

    def __init__(self, policy, failure_rate: float = 0.0, failure_seed: int = 0,
                 delay_range_s: tuple[float, float] | None = None, delay_seed: int = 0):
        if not 0.0 <= failure_rate <= 1.0:
            raise ValueError("failure_rate must be in [0, 1]")
        self.policy = policy
        self.failure_rate = failure_rate
        self._failure_rng = np.random.default_rng(failure_seed)
        self.delay_range_s = delay_range_s
        self._delay_rng = np.random.default_rng(delay_seed)
        self._lock = threading.Lock()

    def next_delay_s(self) -> float:
        if self.delay_range_s is None:
            return 0.0
        lo, hi = self.delay_range_s
        with self._lock:
            return float(self._delay_rng.uniform(lo, hi))

    def handle_request(self, payload: dict) -> tuple[int, dict]:
        """Process one chat-completions payload; returns (status, body)."""
        side_channel = payload.get("observation")
        if side_channel is None:
            return 400, {"error": {"message": "missing observation side-channel"}}
        try:
            observation = Observation.from_dict(side_channel)
        except (KeyError, TypeError, ValueError) as err:
            return 400, {"error": {"message": f"bad observation: {err}"}}

        with self._lock:
            inject_failure = (self.failure_rate > 0.0
                              and self._failure_rng.random() < self.failure_rate)
        if inject_failure:
            return 200, {
                "id": "chatcmpl-scripted",
                "object": "chat.completion",
                "model": payload.get("model", "scripted"),
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant",
                                "content": "unable to choose an action"},
                    "finish_reason": "stop",
                }],
            }
        action = VerbalAction(self.policy(observation))
        return 200, build_tool_call_response(
            action, rationale_text(observation, action),
            model=payload.get("model", "scripted"))


class _ScriptedBackendHandler(BaseHTTPRequestHandler):
    disable_nagle_algorithm = True

    def do_POST(self):  # noqa: N802 - http.server naming
        if self.path != "/v1/chat/completions":
            self.send_error(404)
            return
        length = int(self.headers.get("Content-Length", 0))
        try:
            payload = json.loads(self.rfile.read(length))
        except json.JSONDecodeError:
            self._reply(400, {"error": {"message": "invalid JSON body"}})
            return
        backend = self.server.backend
        delay = backend.next_delay_s()
        if delay > 0.0:
            time.sleep(delay)
        status, body = backend.handle_request(payload)
        self._reply(status, body)

    def _reply(self, status: int, body: dict):
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, fmt, *args):  # pragma: no cover - silence test servers
        pass


class ScriptedBackendServer:
    """Threaded HTTP wrapper serving a ScriptedBackend on localhost."""

    def __init__(self, backend: ScriptedBackend, port: int = 0):
        self.backend = backend
        self._server = ThreadingHTTPServer(("127.0.0.1", port), _ScriptedBackendHandler)
        self._server.backend = backend
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def start(self) -> "ScriptedBackendServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "ScriptedBackendServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


# --- Full language-agent pipeline --------------------------------------------

class LLMAgent:
    """Prompt -> completion -> parse -> throttle pipeline with a sliding window.

    One retry on transport failure, none on parse failure: parse failures are
    model behavior and count toward the failure rate; both map to coast so
    the episode always receives an action.
    """

    def __init__(self, config: EndpointConfig, window_capacity: int = 0,
                 profile: str = "agnostic", system_prompt: str = SYSTEM_PROMPT,
                 transport_retries: int = 1):
        self.config = config
        self.window = ContextWindow(window_capacity)
        self.profile = profile
        self.system_prompt = system_prompt
        self.transport_retries = transport_retries
        self.turns: list[AgentTurn] = []

    @property
    def meta(self) -> dict:
        return {
            "kind": "llm",
            "model": self.config.model,
            "profile": PROMPT_PROFILE_VERSIONS[self.profile],
            "window": self.window.capacity,
        }

    def decide(self, observation: Observation) -> AgentTurn:
        prompt = serialize_prompt(observation, self.window, self.profile)
        messages = [
            {"role": "system", "content": self.system_prompt},
            {"role": "user", "content": prompt},
        ]
        total_latency = 0.0
        result = complete(messages, [PERFORM_ACTION_TOOL], self.config, observation)
        total_latency += result.latency_ms
        attempts = 1
        while not result.ok and attempts <= self.transport_retries:
            result = complete(messages, [PERFORM_ACTION_TOOL], self.config, observation)
            total_latency += result.latency_ms
            attempts += 1

        if not result.ok:
            turn = AgentTurn(prompt_text=prompt, response_text="",
                             parsed_action=None, rationale="",
                             latency_ms=total_latency, failed=True,
                             failure_category=f"transport:{result.failure.category}")
        else:
            parsed = parse_response(result.response)
            response_text = json.dumps(result.response, sort_keys=True)
            if isinstance(parsed, ParseFailure):
                turn = AgentTurn(prompt_text=prompt, response_text=response_text,
                                 parsed_action=None, rationale="",
                                 latency_ms=total_latency, failed=True,
                                 failure_category=f"parse:{parsed.category}")
            else:
                action, rationale = parsed
                turn = AgentTurn(prompt_text=prompt, response_text=response_text,
                                 parsed_action=action, rationale=rationale,
                                 latency_ms=total_latency, failed=False)
        self.turns.append(turn)
        executed = turn.parsed_action if turn.parsed_action is not None else VerbalAction.COAST
        self.window.push(observation.range, executed)
        return turn
