"""Command line: ``agentrt run|validate|list-examples``.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 timeout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from typing import Sequence

from ..errors import ConfigError
from .config import OutputOptions, load_config
from .examples import example_path, list_examples
from .scenario import EXIT_CONFIG, run_scenario


def _config_arg(value: str):
    """Accept a file path or the name of a bundled example."""
    path = example_path(value)
    return path if path is not None else value


def _cmd_run(args) -> int:
    try:
        config = load_config(_config_arg(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.transcript or args.metrics:
        outputs = OutputOptions(args.transcript or config.outputs.transcript, args.metrics or config.outputs.metrics)
        config = dataclasses.replace(config, outputs=outputs)
    report = run_scenario(config)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        status = "timed out" if report.timed_out else ("ok" if report.exit_status == 0 else "failed")
        print(f"{report.name}: {status}; messages={report.messages} final_time={report.final_time!r} steps={report.steps}")
        for kind, counters in sorted(report.counters.items()):
            print(f"  {kind}: " + " ".join(f"{k}={v}" for k, v in sorted(counters.items())))
        if report.error:
            print(f"  error: {report.error}", file=sys.stderr)
    return report.exit_status


def _cmd_validate(args) -> int:
    try:
        config = load_config(_config_arg(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{config.source}: ok ({len(config.containers)} containers, {len(config.agents)} agents, mode {config.run.mode})")
    return 0


def _cmd_list(args) -> int:
    for name, path in list_examples():
        print(f"{name}\t{path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentrt", description="Run agent scenarios from YAML configs.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config or bundled example")
    run.add_argument("config", help="config path or bundled example name")
    run.add_argument("--transcript", help="write the transcript here (overrides the config)")
    run.add_argument("--metrics", help="write metrics JSON here (overrides the config)")
    run.add_argument("--json", action="store_true", help="print the full report as JSON")
    run.set_defaults(func=_cmd_run)

    validate = sub.add_parser("validate", help="check a config without running it")
    validate.add_argument("config")
    validate.set_defaults(func=_cmd_validate)

    examples = sub.add_parser("list-examples", help="list bundled example configs")
    examples.set_defaults(func=_cmd_list)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)
