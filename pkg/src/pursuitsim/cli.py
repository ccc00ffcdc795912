"""Operator command line: generate, run, dataset, evaluate, serve.

Configuration precedence is flags > environment variables (PURSUITSIM_*) >
JSON config file (--config or PURSUITSIM_CONFIG) > built-in defaults. Exit
codes: 0 success, 2 usage error, 3 generation failure, 4 run/evaluation
failure, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .dataset import build_dataset, export_jsonl, log_to_examples, select_top_k
from .environment import EnvironmentConfig
from .episodes import closest_approach, export_trajectory_csv, read_log, write_log
from .evaluation import (
    CoastAgent,
    EvaluationError,
    evaluate,
    render_report,
    run_episode,
)
from .llm import EndpointConfig, LLMAgent
from .navball import NavballAgent
from .scenarios import (
    GenerationError,
    ScenarioConstraints,
    default_evader_elements,
    generate_batch,
    load_scenarios,
    save_scenarios,
    verify_constraints,
)
from .service import ServiceConfig, SessionService

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GENERATION = 3
EXIT_RUN = 4
EXIT_IO = 5

ENV_PREFIX = "PURSUITSIM_"


def _load_config_file(path: str | None) -> dict:
    path = path or os.environ.get(ENV_PREFIX + "CONFIG")
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except OSError as err:
        raise SystemExit(f"cannot read config file {path}: {err}")
    except json.JSONDecodeError as err:
        raise SystemExit(f"config file {path} is not valid JSON: {err}")


def _resolve(flag_value, key: str, file_config: dict, default):
    """flags > environment > config file > default."""
    if flag_value is not None:
        return flag_value
    env_value = os.environ.get(ENV_PREFIX + key.upper())
    if env_value is not None:
        return type(default)(env_value) if default is not None else env_value
    if key in file_config:
        return file_config[key]
    return default


def _constraints_from_args(args, file_config: dict) -> ScenarioConstraints:
    defaults = ScenarioConstraints()
    incl_deg = _resolve(args.max_inclination_delta_deg, "max_inclination_delta_deg",
                        file_config, math.degrees(defaults.max_inclination_delta))
    return ScenarioConstraints(
        max_eccentricity=_resolve(args.max_eccentricity, "max_eccentricity",
                                  file_config, defaults.max_eccentricity),
        max_inclination_delta=math.radians(incl_deg),
        max_initial_distance=_resolve(args.max_initial_distance, "max_initial_distance",
                                      file_config, defaults.max_initial_distance),
        target_initial_distance=_resolve(args.target_initial_distance,
                                         "target_initial_distance", file_config,
                                         defaults.target_initial_distance),
        mission_duration=_resolve(args.mission_duration, "mission_duration",
                                  file_config, defaults.mission_duration),
    )


def _make_agent_factory(args, file_config: dict):
    name = args.agent
    if name == "coast":
        return CoastAgent, "coast"
    if name == "navball":
        return NavballAgent, "navball agent"
    if name == "llm":
        endpoint = _resolve(args.endpoint, "endpoint", file_config, None)
        if not endpoint:
            raise SystemExit("--agent llm requires --endpoint (or PURSUITSIM_ENDPOINT)")
        config = EndpointConfig(
            base_url=endpoint,
            model=_resolve(args.model, "model", file_config, "local"),
            api_key=_resolve(args.api_key, "api_key", file_config, None),
            timeout_s=_resolve(args.timeout, "timeout", file_config, 30.0),
            attach_observation=args.attach_observation,
        )
        window = _resolve(args.window, "window", file_config, 0)
        profile = _resolve(args.profile, "profile", file_config, "agnostic")

        def factory():
            return LLMAgent(config, window_capacity=window, profile=profile)

        return factory, f"llm ({config.model})"
    raise SystemExit(f"unknown agent {name!r}")


# --- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    file_config = _load_config_file(args.config)
    try:
        constraints = _constraints_from_args(args, file_config)
        scenarios = generate_batch(default_evader_elements(), constraints,
                                   count=args.count, master_seed=args.seed)
    except (GenerationError, ValueError) as err:
        print(f"generation failed: {err}", file=sys.stderr)
        return EXIT_GENERATION

    out = Path(args.out)
    try:
        if out.suffix == ".json":
            save_scenarios(scenarios, out)
            written = [out]
        else:
            out.mkdir(parents=True, exist_ok=True)
            written = []
            for index, scenario in enumerate(scenarios):
                path = out / f"scenario_{index:04d}.json"
                save_scenarios([scenario], path)
                written.append(path)
    except OSError as err:
        print(f"failed to write scenarios: {err}", file=sys.stderr)
        return EXIT_IO

    passed = sum(1 for s in scenarios if verify_constraints(s).all_passed)
    print(f"generated {len(scenarios)} scenarios ({passed} constraint-valid) "
          f"-> {written[0] if len(written) == 1 else out}")
    return EXIT_OK


def _load_scenario_arg(path_text: str):
    try:
        scenarios = load_scenarios(path_text)
    except OSError as err:
        raise SystemExit(f"cannot read scenario file {path_text}: {err}")
    except (json.JSONDecodeError, KeyError, ValueError) as err:
        raise SystemExit(f"bad scenario file {path_text}: {err}")
    return scenarios


def cmd_run(args) -> int:
    file_config = _load_config_file(args.config)
    scenarios = _load_scenario_arg(args.scenario)
    factory, method = _make_agent_factory(args, file_config)
    try:
        log = run_episode(scenarios[0], factory(),
                          EnvironmentConfig(), log_id=None)
    except Exception as err:
        print(f"episode failed: {err}", file=sys.stderr)
        return EXIT_RUN

    distance, t_closest = closest_approach(log)
    if args.record:
        try:
            write_log(log, args.record)
        except OSError as err:
            print(f"failed to write log: {err}", file=sys.stderr)
            return EXIT_IO
        print(f"log -> {args.record}")
    if args.trajectory_csv:
        try:
            export_trajectory_csv(log, args.trajectory_csv)
        except OSError as err:
            print(f"failed to write trajectory: {err}", file=sys.stderr)
            return EXIT_IO
        print(f"trajectory -> {args.trajectory_csv}")
    failures = sum(1 for s in log.steps if s.agent.failed)
    print(f"{method}: closest approach {distance:.2f} m at t={t_closest:.0f} s "
          f"({len(log.steps)} steps, {failures} failed turns, "
          f"terminated: {log.termination_reason})")
    return EXIT_OK


def _load_logs_dir(path_text: str):
    directory = Path(path_text)
    if directory.is_file():
        return [read_log(directory)]
    paths = sorted(directory.glob("*.jsonl"))
    if not paths:
        raise SystemExit(f"no .jsonl logs found in {path_text}")
    logs = []
    for path in paths:
        try:
            logs.append(read_log(path))
        except ValueError as err:
            raise SystemExit(f"bad log {path}: {err}")
    return logs


def cmd_dataset(args) -> int:
    try:
        logs = _load_logs_dir(args.logs)
    except OSError as err:
        print(f"failed to read logs: {err}", file=sys.stderr)
        return EXIT_IO
    try:
        examples = build_dataset(logs, top_k=args.top_k, window_capacity=args.window,
                                 profile=args.profile, rank_tie=args.rank_tie)
    except ValueError as err:
        print(f"dataset build failed: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        export_jsonl(examples, args.out)
    except OSError as err:
        print(f"{err}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(examples)} examples from top {args.top_k} of {len(logs)} "
          f"missions -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    file_config = _load_config_file(args.config)
    source = Path(args.scenarios)
    try:
        if source.is_dir():
            scenarios = []
            for path in sorted(source.glob("*.json")):
                scenarios.extend(load_scenarios(path))
        else:
            scenarios = load_scenarios(source)
    except OSError as err:
        print(f"failed to read scenarios: {err}", file=sys.stderr)
        return EXIT_IO
    if not scenarios:
        print("no scenarios found", file=sys.stderr)
        return EXIT_USAGE
    factory, method = _make_agent_factory(args, file_config)
    try:
        report = evaluate(scenarios, factory, workers=args.workers, method_name=method)
    except EvaluationError as err:
        print(f"evaluation aborted: {err} "
              f"({len(err.completed)} episodes completed)", file=sys.stderr)
        return EXIT_RUN
    text = render_report(report, args.format)
    if args.out:
        try:
            Path(args.out).write_text(text + ("\n" if not text.endswith("\n") else ""))
        except OSError as err:
            print(f"failed to write report: {err}", file=sys.stderr)
            return EXIT_IO
        print(f"report -> {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    file_config = _load_config_file(args.config)
    config = ServiceConfig(
        host=_resolve(args.host, "host", file_config, "127.0.0.1"),
        port=int(_resolve(args.port, "port", file_config, 8080)),
        idle_timeout_s=float(_resolve(args.idle_timeout, "idle_timeout",
                                      file_config, 600.0)),
        record_dir=_resolve(args.record_dir, "record_dir", file_config, None),
    )
    try:
        service = SessionService(config)
    except OSError as err:
        print(f"cannot bind {config.host}:{config.port}: {err}", file=sys.stderr)
        return EXIT_IO
    print(f"session service listening on {service.base_url} "
          f"(idle timeout {config.idle_timeout_s:.0f} s)", flush=True)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        print("shutting down")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pursuitsim",
        description="Orbital pursuit-evasion simulator, scenario generator, and "
                    "agent harness.")
    parser.add_argument("--config", help="JSON config file (defaults below flags/env)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_generate = sub.add_parser("generate", help="generate scenario files")
    p_generate.add_argument("--count", type=int, default=100)
    p_generate.add_argument("--seed", type=int, default=0, help="master seed")
    p_generate.add_argument("--out", required=True,
                            help=".json file for a batch or a directory for "
                                 "one file per scenario")
    p_generate.add_argument("--max-eccentricity", type=float, default=None)
    p_generate.add_argument("--max-inclination-delta-deg", type=float, default=None)
    p_generate.add_argument("--max-initial-distance", type=float, default=None)
    p_generate.add_argument("--target-initial-distance", type=float, default=None)
    p_generate.add_argument("--mission-duration", type=float, default=None)
    p_generate.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="run one episode")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--agent", choices=("navball", "llm", "coast"), default="navball")
    p_run.add_argument("--endpoint", default=None, help="chat-completions base URL")
    p_run.add_argument("--model", default=None)
    p_run.add_argument("--api-key", default=None)
    p_run.add_argument("--timeout", type=float, default=None)
    p_run.add_argument("--window", type=int, default=None)
    p_run.add_argument("--profile", choices=("agnostic", "hinted"), default=None)
    p_run.add_argument("--attach-observation", action="store_true",
                       help="attach the raw observation side-channel "
                            "(scripted backends)")
    p_run.add_argument("--record", default=None, help="write the episode log here")
    p_run.add_argument("--trajectory-csv", default=None)
    p_run.set_defaults(func=cmd_run)

    p_dataset = sub.add_parser("dataset", help="build a fine-tuning JSONL dataset")
    p_dataset.add_argument("--logs", required=True, help="directory of episode logs")
    p_dataset.add_argument("--top-k", type=int, required=True)
    p_dataset.add_argument("--window", type=int, default=0)
    p_dataset.add_argument("--profile", choices=("agnostic", "hinted"),
                           default="agnostic")
    p_dataset.add_argument("--rank-tie", choices=("time", "speed"), default="time")
    p_dataset.add_argument("--out", required=True)
    p_dataset.set_defaults(func=cmd_dataset)

    p_evaluate = sub.add_parser("evaluate", help="evaluate an agent over scenarios")
    p_evaluate.add_argument("--scenarios", required=True,
                            help="scenario .json file or directory")
    p_evaluate.add_argument("--agent", choices=("navball", "llm", "coast"),
                            default="navball")
    p_evaluate.add_argument("--endpoint", default=None)
    p_evaluate.add_argument("--model", default=None)
    p_evaluate.add_argument("--api-key", default=None)
    p_evaluate.add_argument("--timeout", type=float, default=None)
    p_evaluate.add_argument("--window", type=int, default=None)
    p_evaluate.add_argument("--profile", choices=("agnostic", "hinted"), default=None)
    p_evaluate.add_argument("--attach-observation", action="store_true")
    p_evaluate.add_argument("--workers", type=int, default=1)
    p_evaluate.add_argument("--format", choices=("table", "json", "csv"),
                            default="table")
    p_evaluate.add_argument("--out", default=None)
    p_evaluate.set_defaults(func=cmd_evaluate)

    p_serve = sub.add_parser("serve", help="run the HTTP session service")
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--idle-timeout", type=float, default=None)
    p_serve.add_argument("--record-dir", default=None)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as err:
        if isinstance(err.code, str):
            print(err.code, file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
