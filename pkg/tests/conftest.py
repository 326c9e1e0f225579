from __future__ import annotations

import json
import shlex
import sys
from pathlib import Path

import pytest

import aits.mock_tool
from aits.ontology import load_triples

FIXTURES = Path(__file__).parent / "fixtures"
HIRING = FIXTURES / "hiring"
MOCK_TOOL = Path(aits.mock_tool.__file__)

MINIMAL_SPEC = (
    'sandbox "s" version "1.0" { system_type classifier risk_class high '
    "requirement R.1 { metric m.a <= 0.5 } }"
)
DEF_A = "def:" + "1" * 16
DEF_B = "def:" + "2" * 16
DEF_X = "def:" + "9" * 16
BASE_ONTOLOGY = f"""\
m.a measures R.1
m.a hasDefinition {DEF_A}
m.a appliesTo classifier
"""

HIRING_DEFS = {
    "fair.dpd": "def:828a66dcf39dc788",
    "fair.eod": "def:7d60baddecac533e",
    "perf.accuracy": "def:14c159f9b7f69d2c",
    "perf.calibration": "def:24d433d16db70a45",
    "robust.flip_rate": "def:b830db94fade81eb",
}


def write_card(directory: Path, tool_id: str, metrics: dict[str, str], scenario: dict | None = None,
               system_types=("classifier",), version: str = "1.0.0", **overrides) -> Path:
    """Write a scripted mock-tool card plus its scenario file; returns the card path."""
    directory.mkdir(parents=True, exist_ok=True)
    scenario_path = directory / f"{tool_id}.scenario.json"
    scenario_path.write_text(json.dumps(scenario or {}), encoding="utf-8")
    invocation = (f"{shlex.quote(sys.executable)} {shlex.quote(str(MOCK_TOOL))} "
                  f"--tool-id {tool_id} --scenario {shlex.quote(str(scenario_path))} {{subject}}")
    card = {
        "tool_id": tool_id,
        "name": f"{tool_id} (mock)",
        "version": version,
        "metrics": [{"metric_id": m, "definition_id": d} for m, d in metrics.items()],
        "supported_system_types": list(system_types),
        "deterministic": True,
        "invocation": invocation,
        "protocol_version": 1,
    }
    card.update(overrides)
    path = directory / f"{tool_id}.card.json"
    path.write_text(json.dumps(card, indent=2), encoding="utf-8")
    return path


def hiring_cards(directory: Path, *, delay=0, fail_dpd: bool = False) -> list[Path]:
    """Three deterministic mock tools covering the hiring-screener spec."""
    d = HIRING_DEFS
    return [
        write_card(directory, "fairlens", {"fair.dpd": d["fair.dpd"], "fair.eod": d["fair.eod"]},
                   {"values": {"fair.dpd": 0.12 if fail_dpd else 0.05, "fair.eod": 0.07},
                    "instances": {"fair.dpd": [{"instance_id": "group:f", "value": 0.41},
                                               {"instance_id": "group:m", "value": 0.46}]},
                    "delay": delay}),
        write_card(directory, "perfbench", {"perf.accuracy": d["perf.accuracy"],
                                            "perf.calibration": d["perf.calibration"]},
                   {"values": {"perf.accuracy": 0.91, "perf.calibration": 0.03}, "delay": delay}),
        write_card(directory, "robustkit", {"robust.flip_rate": d["robust.flip_rate"]},
                   {"values": {"robust.flip_rate": 0.02}, "delay": delay}),
    ]


@pytest.fixture
def base_ontology():
    return load_triples(BASE_ONTOLOGY)


@pytest.fixture
def hiring_ontology():
    return load_triples((HIRING / "reference.aitso").read_text(encoding="utf-8"))


# acceptance summary ---------------------------------------------------------

ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    ACCEPTANCE_RESULTS[name] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(ACCEPTANCE_RESULTS.items()):
        terminalreporter.write_line(f"{outcome}  {name}")
