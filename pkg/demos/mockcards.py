"""Helpers shared by the demo scripts: scripted mock tools and their cards."""

import json
import shlex
import sys
from pathlib import Path

import aits.mock_tool

DATA = Path(__file__).parent / "data"
MOCK = Path(aits.mock_tool.__file__)

DEFS = {
    "fair.dpd": "def:828a66dcf39dc788",
    "fair.eod": "def:7d60baddecac533e",
    "perf.accuracy": "def:14c159f9b7f69d2c",
    "perf.calibration": "def:24d433d16db70a45",
    "robust.flip_rate": "def:b830db94fade81eb",
}


def card(directory, tool_id, values, **scenario):
    """Write ``<tool_id>.card.json`` for a mock tool that reports ``values``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    script = directory / f"{tool_id}.scenario.json"
    script.write_text(json.dumps({"values": values, **scenario}))
    doc = {
        "tool_id": tool_id,
        "name": f"{tool_id} (scripted)",
        "version": "1.0.0",
        "metrics": [{"metric_id": m, "definition_id": DEFS[m]} for m in values if m in DEFS],
        "supported_system_types": ["classifier"],
        "deterministic": True,
        "invocation": f"{shlex.quote(sys.executable)} {shlex.quote(str(MOCK))} "
                      f"--tool-id {tool_id} --scenario {shlex.quote(str(script))} {{subject}}",
        "protocol_version": 1,
    }
    path = directory / f"{tool_id}.card.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def hiring_tools(directory, dpd=0.05, accuracy=0.91, flip_rate=0.02, eod=0.07):
    return [
        card(directory, "fairlens", {"fair.dpd": dpd, "fair.eod": eod}),
        card(directory, "perfbench", {"perf.accuracy": accuracy, "perf.calibration": 0.03}),
        card(directory, "robustkit", {"robust.flip_rate": flip_rate}),
    ]
