"""Scripted assessment tool speaking protocol v1, for tests and demos.

Usage::

    python -m aits.mock_tool --scenario scenario.json <subject>

Scenario keys (all optional):

    before_hello   events written before the hello line
    hello          false to skip the hello line
    protocol_version
    log            true to emit one log line after hello
    delay          seconds, or [lo, hi] for a uniform random pause
    values         metric_id -> value, emitted for each requested metric
    instances      metric_id -> list of {instance_id, value}
    extra          further events written verbatim
    raw            lines written verbatim (may be non-JSON)
    hang           seconds to sleep before done
    done           "ok" (default), "failed", or null for no done line
    exit_code      process exit status
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time


def _emit(obj) -> None:
    line = obj if isinstance(obj, str) else json.dumps(obj, sort_keys=True)
    sys.stdout.write(line + "\n")
    sys.stdout.flush()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="aits-mock-tool")
    parser.add_argument("--scenario", help="path to a scenario JSON file")
    parser.add_argument("--script", help="inline scenario JSON")
    parser.add_argument("--tool-id", default="mock")
    parser.add_argument("subject")
    args = parser.parse_args(argv)

    if args.scenario:
        with open(args.scenario, encoding="utf-8") as fh:
            scenario = json.load(fh)
    else:
        scenario = json.loads(args.script or "{}")

    request = json.loads(sys.stdin.readline() or "{}")
    requested = request.get("metrics_requested", [])

    for evt in scenario.get("before_hello", []):
        _emit(evt)
    if scenario.get("hello", True):
        _emit({"event": "hello", "protocol_version": scenario.get("protocol_version", 1),
               "tool_id": args.tool_id})
    if scenario.get("log"):
        _emit({"event": "log", "message": f"assessing {args.subject}"})

    delay = scenario.get("delay", 0)
    if isinstance(delay, list):
        delay = random.uniform(*delay)
    if delay:
        time.sleep(delay)

    values = scenario.get("values", {})
    instances = scenario.get("instances", {})
    for metric in requested:
        if metric in values:
            evt = {"event": "evidence", "metric_id": metric, "value": values[metric]}
            if metric in instances:
                evt["instances"] = instances[metric]
            _emit(evt)
    for evt in scenario.get("extra", []):
        _emit(evt)
    for line in scenario.get("raw", []):
        _emit(line)

    if scenario.get("hang"):
        time.sleep(scenario["hang"])
    done = scenario.get("done", "ok")
    if done is not None:
        _emit({"event": "done", "status": done})
    return int(scenario.get("exit_code", 0))


if __name__ == "__main__":
    sys.exit(main())
