import json

import numpy as np
import pytest

from pursuitsim.environment import PursuitEvasionEnv, ThrottleVector
from pursuitsim.llm import (
    ACTION_WORDS,
    PERFORM_ACTION_TOOL,
    ContextWindow,
    EndpointConfig,
    LLMAgent,
    ParseFailure,
    ScriptedBackend,
    ScriptedBackendServer,
    VerbalAction,
    action_to_throttle,
    build_tool_call_response,
    complete,
    parse_response,
    rationale_text,
    serialize_prompt,
    throttle_to_action,
)
from pursuitsim.navball import decide as navball_decide
from pursuitsim.scenarios import ScenarioConstraints, default_evader_elements, sample_scenario

EVADER = default_evader_elements()
DEFAULTS = ScenarioConstraints()


def first_observation(seed=5):
    return PursuitEvasionEnv(sample_scenario(EVADER, DEFAULTS, seed=seed)).reset()


class TestActionThrottleMapping:
    def test_definitional_mapping(self):
        assert action_to_throttle(VerbalAction.FORWARD) == ThrottleVector(0, 1, 0)
        assert action_to_throttle(VerbalAction.BACKWARD) == ThrottleVector(0, -1, 0)
        assert action_to_throttle(VerbalAction.RIGHT) == ThrottleVector(1, 0, 0)
        assert action_to_throttle(VerbalAction.LEFT) == ThrottleVector(-1, 0, 0)
        assert action_to_throttle(VerbalAction.UP) == ThrottleVector(0, 0, 1)
        assert action_to_throttle(VerbalAction.DOWN) == ThrottleVector(0, 0, -1)
        assert action_to_throttle(VerbalAction.COAST) == ThrottleVector(0, 0, 0)

    def test_inverse_round_trip(self):
        for action in VerbalAction:
            assert throttle_to_action(action_to_throttle(action)) is action

    def test_multi_axis_throttle_has_no_word(self):
        assert throttle_to_action(ThrottleVector(1, 1, 0)) is None

    def test_accepts_plain_strings(self):
        assert action_to_throttle("forward") == ThrottleVector(0, 1, 0)


class TestContextWindow:
    def test_fifo_eviction(self):
        window = ContextWindow(capacity=3)
        for i in range(5):
            window.push(2700.0 - i, VerbalAction.FORWARD)
        entries = window.entries()
        assert len(entries) == 3
        assert [e.range_m for e in entries] == [2698.0, 2697.0, 2696.0]

    def test_last_min_n_capacity_in_order(self):
        window = ContextWindow(capacity=5)
        pushes = [(100.0 * i, VerbalAction.COAST) for i in range(1, 4)]
        for r, a in pushes:
            window.push(r, a)
        assert [(e.range_m, e.action) for e in window.entries()] == pushes

    def test_zero_capacity_stays_empty(self):
        window = ContextWindow(capacity=0)
        window.push(1.0, VerbalAction.UP)
        assert window.entries() == []

    def test_negative_capacity_rejected(self):
        with pytest.raises(ValueError):
            ContextWindow(capacity=-1)


class TestSerializePrompt:
    def test_empty_window_has_no_history_section(self):
        prompt = serialize_prompt(first_observation(), ContextWindow(0))
        assert "Previous actions" not in prompt
        assert prompt.startswith("Mission time: 0.00 s")
        assert "Range (m):" in prompt
        assert "Range rate (m/s):" in prompt

    def test_window_capacity_three_shows_last_three(self):
        window = ContextWindow(capacity=3)
        for i in range(5):
            window.push(2700.0 - i, VerbalAction.FORWARD)
        prompt = serialize_prompt(first_observation(), window)
        history = [line for line in prompt.split("\n") if line.startswith("- ")]
        assert len(history) == 3
        assert history[0] == "- forward at range 2698.00 m"

    def test_byte_identical_for_identical_inputs(self):
        obs = first_observation()
        window = ContextWindow(capacity=2)
        window.push(2700.0, VerbalAction.COAST)
        assert serialize_prompt(obs, window) == serialize_prompt(obs, window)

    def test_bounded_length(self):
        window = ContextWindow(capacity=5)
        for i in range(9):
            window.push(2700.0 - i, VerbalAction.BACKWARD)
        prompt = serialize_prompt(first_observation(), window, profile="hinted")
        assert len(prompt) < 4000

    def test_hinted_profile_adds_hint(self):
        obs = first_observation()
        assert "Hint:" in serialize_prompt(obs, None, profile="hinted")
        assert "Hint:" not in serialize_prompt(obs, None, profile="agnostic")

    def test_unknown_profile_rejected(self):
        with pytest.raises(ValueError):
            serialize_prompt(first_observation(), None, profile="verbose")


class TestParseResponse:
    def test_canonical_direction_form(self):
        response = build_tool_call_response(VerbalAction.FORWARD, "closing in")
        action, rationale = parse_response(response)
        assert action is VerbalAction.FORWARD
        assert rationale == "closing in"

    def test_all_words_round_trip_direction_form(self):
        for action in VerbalAction:
            parsed, _ = parse_response(build_tool_call_response(action, "r"))
            assert parsed is action

    def test_triplet_form(self):
        response = build_tool_call_response(VerbalAction.COAST, "x")
        call = response["choices"][0]["message"]["tool_calls"][0]["function"]
        call["arguments"] = json.dumps({"ft": 1, "rt": 0, "dt": 0})
        action, _ = parse_response(response)
        assert action is VerbalAction.FORWARD

    def test_all_triplet_mappings(self):
        cases = {
            (1, 0, 0): VerbalAction.FORWARD,
            (-1, 0, 0): VerbalAction.BACKWARD,
            (0, 1, 0): VerbalAction.RIGHT,
            (0, -1, 0): VerbalAction.LEFT,
            (0, 0, 1): VerbalAction.DOWN,
            (0, 0, -1): VerbalAction.UP,
            (0, 0, 0): VerbalAction.COAST,
        }
        for (ft, rt, dt), expected in cases.items():
            response = build_tool_call_response(VerbalAction.COAST, "")
            call = response["choices"][0]["message"]["tool_calls"][0]["function"]
            call["arguments"] = json.dumps({"ft": ft, "rt": rt, "dt": dt})
            action, _ = parse_response(response)
            assert action is expected, (ft, rt, dt)

    def test_multiple_nonzero_triplet_fails(self):
        response = build_tool_call_response(VerbalAction.COAST, "")
        call = response["choices"][0]["message"]["tool_calls"][0]["function"]
        call["arguments"] = json.dumps({"ft": 1, "rt": -1, "dt": 0})
        failure = parse_response(response)
        assert isinstance(failure, ParseFailure)
        assert failure.category == "bad_value"

    def test_plain_text_is_no_call(self):
        response = {"choices": [{"message": {"role": "assistant", "content": "hello"}}]}
        failure = parse_response(response)
        assert isinstance(failure, ParseFailure)
        assert failure.category == "no_call"

    def test_wrong_function_name(self):
        response = build_tool_call_response(VerbalAction.FORWARD, "")
        response["choices"][0]["message"]["tool_calls"][0]["function"]["name"] = "fly"
        assert parse_response(response).category == "bad_name"

    def test_unparseable_arguments(self):
        response = build_tool_call_response(VerbalAction.FORWARD, "")
        response["choices"][0]["message"]["tool_calls"][0]["function"]["arguments"] = "{oops"
        assert parse_response(response).category == "bad_args"

    def test_unknown_direction_word(self):
        response = build_tool_call_response(VerbalAction.FORWARD, "")
        response["choices"][0]["message"]["tool_calls"][0]["function"]["arguments"] = \
            json.dumps({"direction": "sideways"})
        assert parse_response(response).category == "bad_value"


class TestScriptedBackendHTTP:
    def test_loopback_parse_and_latency(self):
        obs = first_observation()
        backend = ScriptedBackend(policy=navball_decide)
        with ScriptedBackendServer(backend) as server:
            config = EndpointConfig(base_url=server.base_url, attach_observation=True)
            messages = [{"role": "user", "content": serialize_prompt(obs, None)}]
            result = complete(messages, [PERFORM_ACTION_TOOL], config, observation=obs)
        assert result.ok
        assert result.latency_ms > 0.0
        action, rationale = parse_response(result.response)
        assert action is navball_decide(obs)
        assert rationale == rationale_text(obs, action)

    def test_missing_side_channel_is_http_failure(self):
        backend = ScriptedBackend(policy=navball_decide)
        with ScriptedBackendServer(backend) as server:
            config = EndpointConfig(base_url=server.base_url, attach_observation=False)
            result = complete([{"role": "user", "content": "x"}], [PERFORM_ACTION_TOOL],
                              config, observation=first_observation())
        assert not result.ok
        assert result.failure.category == "http_status"

    def test_unreachable_endpoint_connect_failure(self):
        config = EndpointConfig(base_url="http://127.0.0.1:1", timeout_s=2.0)
        result = complete([{"role": "user", "content": "x"}], [PERFORM_ACTION_TOOL], config)
        assert not result.ok
        assert result.failure.category == "connect"

    def test_injected_failure_saturation(self):
        obs = first_observation()
        backend = ScriptedBackend(policy=navball_decide, failure_rate=1.0)
        status, body = backend.handle_request(
            {"model": "m", "observation": obs.to_dict()})
        assert status == 200
        failure = parse_response(body)
        assert isinstance(failure, ParseFailure)
        assert failure.category == "no_call"

    def test_injected_failure_rate_statistics(self):
        obs = first_observation()
        backend = ScriptedBackend(policy=navball_decide, failure_rate=0.368,
                                  failure_seed=7)
        failures = 0
        turns = 10_000
        for _ in range(turns):
            _, body = backend.handle_request({"model": "m", "observation": obs.to_dict()})
            if isinstance(parse_response(body), ParseFailure):
                failures += 1
        rate = failures / turns
        assert abs(rate - 0.368) <= 0.015


class TestMalformedBackend:
    def test_malformed_json_failure(self):
        import threading
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

        class BadHandler(BaseHTTPRequestHandler):
            def do_POST(self):
                payload = b"{this is not json"
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, fmt, *args):
                pass

        server = ThreadingHTTPServer(("127.0.0.1", 0), BadHandler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            host, port = server.server_address
            config = EndpointConfig(base_url=f"http://{host}:{port}", timeout_s=5.0)
            result = complete([{"role": "user", "content": "x"}], [PERFORM_ACTION_TOOL],
                              config)
            assert not result.ok
            assert result.failure.category == "malformed"
        finally:
            server.shutdown()
            server.server_close()


class TestLLMAgentPipeline:
    def test_loop_closure_matches_direct_policy(self):
        scenario = sample_scenario(EVADER, DEFAULTS, seed=23)
        direct_env = PursuitEvasionEnv(scenario)
        obs = direct_env.reset()
        direct_actions = []
        while not direct_env.terminated and len(direct_actions) < 60:
            action = navball_decide(obs)
            direct_actions.append(action)
            obs = direct_env.step(action_to_throttle(action)).observation

        backend = ScriptedBackend(policy=navball_decide)
        with ScriptedBackendServer(backend) as server:
            config = EndpointConfig(base_url=server.base_url, attach_observation=True)
            agent = LLMAgent(config, window_capacity=3)
            env = PursuitEvasionEnv(scenario)
            obs = env.reset()
            piped_actions = []
            while not env.terminated and len(piped_actions) < 60:
                turn = agent.decide(obs)
                assert not turn.failed
                piped_actions.append(turn.parsed_action)
                obs = env.step(action_to_throttle(turn.parsed_action)).observation

        assert piped_actions == direct_actions

    def test_failure_maps_to_coast_and_counts(self):
        scenario = sample_scenario(EVADER, DEFAULTS, seed=23)
        backend = ScriptedBackend(policy=navball_decide, failure_rate=1.0)
        with ScriptedBackendServer(backend) as server:
            config = EndpointConfig(base_url=server.base_url, attach_observation=True)
            agent = LLMAgent(config, window_capacity=2)
            env = PursuitEvasionEnv(scenario)
            obs = env.reset()
            turn = agent.decide(obs)
        assert turn.failed
        assert turn.parsed_action is None
        assert turn.failure_category == "parse:no_call"
        # The executed (coast) action enters the sliding window.
        assert agent.window.entries()[-1].action is VerbalAction.COAST

    def test_transport_retry_then_failure(self):
        config = EndpointConfig(base_url="http://127.0.0.1:1", timeout_s=1.0)
        agent = LLMAgent(config, transport_retries=1)
        turn = agent.decide(first_observation())
        assert turn.failed
        assert turn.failure_category.startswith("transport:")


def test_rationale_text_mentions_trend_and_choice():
    obs = first_observation()
    text = rationale_text(obs, VerbalAction.FORWARD)
    assert "forward" in text
    assert ("closing" in text) or ("opening" in text)
    assert f"{obs.range:.2f}" in text


def test_tool_schema_shape():
    assert PERFORM_ACTION_TOOL["type"] == "function"
    fn = PERFORM_ACTION_TOOL["function"]
    assert fn["name"] == "perform_action"
    assert set(fn["parameters"]["properties"]["direction"]["enum"]) == set(ACTION_WORDS)
