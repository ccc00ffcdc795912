"""HTTP session service: wire-protocol access to pursuit-evasion episodes.

Endpoints:
    POST   /sessions                 create a session (inline scenario or seed)
    POST   /sessions/{id}/step       apply one action (verbal word or {r,s,w})
    GET    /sessions/{id}/log        episode log so far (JSON-lines)
    GET    /sessions/{id}/telemetry  server-sent event stream of observations
    DELETE /sessions/{id}            tear a session down

Sessions are ephemeral: idle ones are reaped after a timeout, and nothing
survives a restart except logs written to the recording directory. Within a
session steps are strictly serialized; a concurrent step request is rejected
with a conflict rather than queued, so a human pilot always knows which
input was applied.
"""

from __future__ import annotations

import json
import queue
import re
import threading
import time
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .environment import (
    EnvironmentConfig,
    EpisodeFinishedError,
    InvalidScenarioError,
    PursuitEvasionEnv,
    ThrottleVector,
)
from .episodes import (
    AgentTurnRecord,
    EpisodeLog,
    StepRecord,
    header_to_dict,
    log_to_jsonl,
    step_record_to_dict,
)
from .llm import VerbalAction, action_to_throttle, throttle_to_action
from .scenarios import (
    GenerationError,
    ScenarioConstraints,
    default_evader_elements,
    sample_scenario,
    scenario_from_dict,
    verify_constraints,
)

DEFAULT_IDLE_TIMEOUT_S = 600.0
REAPER_INTERVAL_S = 5.0

_SESSION_PATH = re.compile(r"^/sessions/([0-9a-f-]{36})(/(step|log|telemetry))?$")

_STREAM_END = object()


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 0
    idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S
    record_dir: str | None = None


class Session:
    """One live episode plus its log, subscribers, and recording sink."""

    def __init__(self, session_id: str, env: PursuitEvasionEnv, record_dir: str | None):
        self.session_id = session_id
        self.env = env
        self.step_lock = threading.Lock()
        self.last_active = time.monotonic()
        self.subscribers: list[queue.Queue] = []
        self.subscribers_lock = threading.Lock()
        initial = env.reset()
        self.log = EpisodeLog(log_id=session_id, scenario=env.scenario, initial=initial,
                              steps=[], agent_meta={"kind": "session"})
        self._record_path = None
        if record_dir:
            directory = Path(record_dir)
            directory.mkdir(parents=True, exist_ok=True)
            self._record_path = directory / f"{session_id}.jsonl"
            self._record_path.write_text(
                json.dumps(header_to_dict(self.log), sort_keys=True) + "\n")

    def touch(self) -> None:
        self.last_active = time.monotonic()

    def record_step(self, record: StepRecord) -> None:
        self.log.steps.append(record)
        if self._record_path is not None:
            with self._record_path.open("a") as handle:
                handle.write(json.dumps(step_record_to_dict(record), sort_keys=True) + "\n")

    def flush_termination(self) -> None:
        """Rewrite the header so the stored log carries the final reason."""
        self.log.termination_reason = self.env.termination_reason
        if self._record_path is not None and self._record_path.exists():
            lines = self._record_path.read_text().splitlines()
            lines[0] = json.dumps(header_to_dict(self.log), sort_keys=True)
            self._record_path.write_text("\n".join(lines) + "\n")

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self.subscribers_lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.subscribers_lock:
            if q in self.subscribers:
                self.subscribers.remove(q)

    def publish(self, event: dict | object) -> None:
        with self.subscribers_lock:
            for q in self.subscribers:
                q.put(event)


class SessionRegistry:
    """Thread-safe id -> Session map with idle reaping."""

    def __init__(self, idle_timeout_s: float = DEFAULT_IDLE_TIMEOUT_S):
        self.idle_timeout_s = idle_timeout_s
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def remove(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.pop(session_id, None)

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._sessions)

    def reap_idle(self) -> list[str]:
        now = time.monotonic()
        reaped = []
        with self._lock:
            for session_id, session in list(self._sessions.items()):
                if now - session.last_active > self.idle_timeout_s:
                    del self._sessions[session_id]
                    reaped.append(session_id)
                    session.publish(_STREAM_END)
        return reaped


def _json_error(message: str, **extra) -> dict:
    return {"error": {"message": message, **extra}}


def _parse_action(payload: dict) -> ThrottleVector | str:
    """Action from a step request: verbal word or {r,s,w} object; str = error."""
    action = payload.get("action")
    if isinstance(action, str):
        try:
            return action_to_throttle(VerbalAction(action))
        except ValueError:
            return f"unknown action word {action!r}"
    if isinstance(action, dict):
        try:
            return ThrottleVector(radial=int(action["r"]),
                                  along_track=int(action["s"]),
                                  cross_track=int(action["w"]))
        except (KeyError, TypeError, ValueError) as err:
            return f"bad throttle object: {err}"
    return "missing or invalid 'action' field"


class SessionServiceHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True
    timeout = 60.0  # reap handler threads stuck on dead keep-alive sockets

    # -- plumbing -------------------------------------------------------------

    @property
    def registry(self) -> SessionRegistry:
        return self.server.registry

    @property
    def service_config(self) -> ServiceConfig:
        return self.server.service_config

    def _read_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw)
        except json.JSONDecodeError as err:
            self._reply(400, _json_error(f"invalid JSON body: {err}"))
            return None

    def _reply(self, status: int, body: dict | None = None, text: str | None = None,
               content_type: str = "application/json") -> None:
        if text is not None:
            data = text.encode()
        else:
            data = json.dumps(body, sort_keys=True).encode() if body is not None else b""
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        if data:
            self.wfile.write(data)

    def log_message(self, fmt, *args):  # pragma: no cover - quiet server
        pass

    # -- routes ---------------------------------------------------------------

    def do_POST(self):  # noqa: N802
        if self.path == "/sessions":
            self._create_session()
            return
        match = _SESSION_PATH.match(self.path)
        if match and match.group(3) == "step":
            self._step_session(match.group(1))
            return
        self._reply(404, _json_error("no such endpoint"))

    def do_GET(self):  # noqa: N802
        if self.path == "/health":
            self._reply(200, {"status": "ok", "sessions": len(self.registry.ids())})
            return
        match = _SESSION_PATH.match(self.path)
        if match and match.group(3) == "log":
            self._get_log(match.group(1))
            return
        if match and match.group(3) == "telemetry":
            self._stream_telemetry(match.group(1))
            return
        self._reply(404, _json_error("no such endpoint"))

    def do_DELETE(self):  # noqa: N802
        match = _SESSION_PATH.match(self.path)
        if match and match.group(3) is None:
            session = self.registry.remove(match.group(1))
            if session is None:
                self._reply(404, _json_error("unknown session"))
                return
            session.publish(_STREAM_END)
            self._reply(204)
            return
        self._reply(404, _json_error("no such endpoint"))

    # -- handlers -------------------------------------------------------------

    def _create_session(self):
        payload = self._read_json()
        if payload is None:
            return
        try:
            if "scenario" in payload:
                scenario = scenario_from_dict(payload["scenario"])
            elif "seed" in payload:
                constraints = ScenarioConstraints(**payload.get("constraints", {}))
                scenario = sample_scenario(default_evader_elements(), constraints,
                                           seed=int(payload["seed"]))
            else:
                self._reply(400, _json_error("provide 'scenario' or 'seed'"))
                return
        except (KeyError, TypeError, ValueError) as err:
            self._reply(400, _json_error(f"bad scenario: {err}"))
            return
        except GenerationError as err:
            self._reply(422, _json_error(str(err)))
            return

        env = PursuitEvasionEnv(scenario, self.server.env_config)
        try:
            session = Session(str(uuid.uuid4()), env, self.service_config.record_dir)
        except InvalidScenarioError as err:
            report = [
                {"name": c.name, "passed": c.passed, "measured": c.measured,
                 "limit": c.limit}
                for c in err.report.checks
            ]
            self._reply(422, _json_error("scenario violates constraints",
                                         constraint_report=report))
            return
        self.registry.add(session)
        self._reply(201, {
            "session_id": session.session_id,
            "observation": session.log.initial.to_dict(),
            "constraint_report": [
                {"name": c.name, "passed": c.passed}
                for c in verify_constraints(scenario).checks
            ],
        })

    def _step_session(self, session_id: str):
        session = self.registry.get(session_id)
        if session is None:
            self._reply(404, _json_error("unknown session"))
            return
        payload = self._read_json()
        if payload is None:
            return
        throttle = _parse_action(payload)
        if isinstance(throttle, str):
            self._reply(400, _json_error(throttle))
            return
        if not session.step_lock.acquire(blocking=False):
            self._reply(409, _json_error("a step is already in flight"))
            return
        # The lock serializes environment mutation only; the response is
        # written after release so a client that saw this step's reply can
        # immediately issue the next one without racing the lock.
        try:
            session.touch()
            try:
                result = session.env.step(throttle)
            except EpisodeFinishedError:
                result = None
            if result is not None:
                word = throttle_to_action(throttle)
                session.record_step(StepRecord(
                    observation=result.observation,
                    action=throttle,
                    agent=AgentTurnRecord(verbal=word.value if word else ""),
                ))
                session.publish({
                    "observation": result.observation.to_dict(),
                    "terminated": result.terminated,
                    "termination_reason": result.termination_reason,
                })
                if result.terminated:
                    session.flush_termination()
                    session.publish(_STREAM_END)
        finally:
            session.step_lock.release()
        if result is None:
            self._reply(409, _json_error("episode already terminated"))
        else:
            self._reply(200, result.to_dict())

    def _get_log(self, session_id: str):
        session = self.registry.get(session_id)
        if session is None:
            self._reply(404, _json_error("unknown session"))
            return
        session.touch()
        session.log.termination_reason = session.env.termination_reason
        self._reply(200, text=log_to_jsonl(session.log),
                    content_type="application/x-ndjson")

    def _stream_telemetry(self, session_id: str):
        session = self.registry.get(session_id)
        if session is None:
            self._reply(404, _json_error("unknown session"))
            return
        session.touch()
        # Subscribe before the headers go out: once the client has seen the
        # response headers, every later step event must reach this stream
        # (there is no replay of earlier ones).
        q = session.subscribe()
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()

        if session.env.terminated:
            session.unsubscribe(q)
            self._write_sse("termination",
                            {"termination_reason": session.env.termination_reason})
            return

        try:
            while True:
                try:
                    event = q.get(timeout=1.0)
                except queue.Empty:
                    if session.env.terminated or self.registry.get(session_id) is None:
                        break
                    continue
                if event is _STREAM_END:
                    break
                if not self._write_sse("observation", event):
                    return
            self._write_sse("termination",
                            {"termination_reason": session.env.termination_reason})
        finally:
            session.unsubscribe(q)

    def _write_sse(self, event: str, data: dict) -> bool:
        try:
            payload = f"event: {event}\ndata: {json.dumps(data, sort_keys=True)}\n\n"
            self.wfile.write(payload.encode())
            self.wfile.flush()
            return True
        except (BrokenPipeError, ConnectionResetError):
            return False


class SessionService:
    """Threaded HTTP server wrapper with idle-session reaping."""

    def __init__(self, config: ServiceConfig = ServiceConfig(),
                 env_config: EnvironmentConfig = EnvironmentConfig()):
        self.config = config
        self._server = ThreadingHTTPServer((config.host, config.port),
                                           SessionServiceHandler)
        self._server.registry = SessionRegistry(config.idle_timeout_s)
        self._server.service_config = config
        self._server.env_config = env_config
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._reaper_stop = threading.Event()
        self._reaper = threading.Thread(target=self._reap_loop, daemon=True)

    @property
    def registry(self) -> SessionRegistry:
        return self._server.registry

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def _reap_loop(self):
        interval = min(REAPER_INTERVAL_S, max(self.config.idle_timeout_s / 4.0, 0.05))
        while not self._reaper_stop.wait(interval):
            self.registry.reap_idle()

    def start(self) -> "SessionService":
        self._thread.start()
        self._reaper.start()
        return self

    def stop(self) -> None:
        self._reaper_stop.set()
        self._server.shutdown()
        self._server.server_close()

    def serve_forever(self) -> None:
        """Run in the foreground until interrupted (used by the CLI)."""
        self._reaper.start()
        try:
            self._server.serve_forever()
        finally:
            self._reaper_stop.set()
            self._server.server_close()

    def __enter__(self) -> "SessionService":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
