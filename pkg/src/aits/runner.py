"""External assessment tools over the line-delimited JSON protocol (v1).

Engine to tool: one line holding the RunRequest. Tool to engine::

    {"event": "hello", "protocol_version": 1, "tool_id": "..."}
    {"event": "evidence", "metric_id": "...", "value": 0.12, "instances": [...]}
    {"event": "log", "message": "..."}
    {"event": "done", "status": "ok" | "failed"}

Any line that is not a JSON object is a protocol violation.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import subprocess
import threading
import time
import uuid
from collections import defaultdict, deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from aits.canonical import canonical_dumps, decode
from aits.errors import AitsError, Finding
from aits.evidence import EvidenceRecord, Instance
from aits.ontology import Ontology
from aits.registry import PLACEHOLDER, Target, ToolCard

DEFAULT_TIMEOUT = 300.0
KILL_GRACE = 2.0
EVENTS = ("hello", "evidence", "log", "done")
_EOF = object()


@dataclass(frozen=True)
class RunRequest:
    run_id: str
    metrics_requested: tuple[str, ...]
    subject: str
    params: Mapping[str, str] = field(default_factory=dict)
    protocol_version: int = 1

    def __post_init__(self) -> None:
        if not self.metrics_requested:
            raise ValueError("metrics_requested must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol_version": self.protocol_version,
            "run_id": self.run_id,
            "metrics_requested": list(self.metrics_requested),
            "subject": self.subject,
            "params": dict(self.params),
        }


@dataclass
class ToolRun:
    """Everything observed from one invocation, including partial output on failure."""

    tool_id: str
    run_id: str
    events: list[dict[str, Any]] = field(default_factory=list)
    returncode: int | None = None
    error: str | None = None  # spawn | protocol | timeout | exit
    message: str = ""
    stderr_tail: list[str] = field(default_factory=list)

    @property
    def done_status(self) -> str | None:
        for e in reversed(self.events):
            if e.get("event") == "done":
                return e.get("status")
        return None

    @property
    def succeeded(self) -> bool:
        return self.error is None and self.done_status == "ok"

    @property
    def evidence(self) -> list[dict[str, Any]]:
        return [e for e in self.events if e.get("event") == "evidence"]


class ToolRunError(AitsError):
    kind = "error"

    def __init__(self, message: str, run: ToolRun) -> None:
        self.run = run
        run.error = self.kind
        run.message = message
        super().__init__(f"{run.tool_id}: {message}")


class SpawnError(ToolRunError):
    kind = "spawn"


class ProtocolViolation(ToolRunError):
    kind = "protocol"


class ToolTimeout(ToolRunError):
    kind = "timeout"


class ToolExitError(ToolRunError):
    kind = "exit"


def _finite_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def check_event(obj: Any, seen_hello: bool, protocol_version: int) -> str | None:
    """Return a violation message for ``obj`` given the stream state, or None."""
    if not isinstance(obj, dict):
        return "event is not a JSON object"
    kind = obj.get("event")
    if kind not in EVENTS:
        return f"unknown event {kind!r}"
    if not seen_hello and kind != "hello":
        return f"{kind} event before hello"
    if kind == "hello":
        if seen_hello:
            return "second hello"
        if obj.get("protocol_version") != protocol_version or isinstance(obj.get("protocol_version"), bool):
            return f"protocol version mismatch: tool says {obj.get('protocol_version')!r}, expected {protocol_version}"
    elif kind == "evidence":
        if not isinstance(obj.get("metric_id"), str) or not obj["metric_id"]:
            return "evidence without metric_id"
        if not _finite_number(obj.get("value")):
            return f"evidence value for {obj['metric_id']} is not a finite number"
        inst = obj.get("instances")
        if inst is not None:
            if not isinstance(inst, list):
                return "instances must be a list"
            for i in inst:
                if (not isinstance(i, dict) or not isinstance(i.get("instance_id"), str)
                        or not _finite_number(i.get("value"))):
                    return "instances entries need a string instance_id and a finite value"
    elif kind == "log":
        if not isinstance(obj.get("message"), str):
            return "log event without message"
    elif obj.get("status") not in ("ok", "failed"):
        return f"done status {obj.get('status')!r} is not ok|failed"
    return None


def _pump(stream, sink: queue.Queue) -> None:
    try:
        for line in iter(stream.readline, b""):
            sink.put(line)
    except (OSError, ValueError):
        pass
    finally:
        sink.put(_EOF)


def _drain(stream, tail: deque) -> None:
    try:
        for line in iter(stream.readline, b""):
            tail.append(line.decode("utf-8", "replace").rstrip())
    except (OSError, ValueError):
        pass


def _kill(proc: subprocess.Popen) -> None:
    if proc.poll() is None:
        proc.kill()
    try:
        proc.wait(timeout=KILL_GRACE)
    except subprocess.TimeoutExpired:
        pass


def build_argv(card: ToolCard, subject: str) -> list[str]:
    return [arg.replace(PLACEHOLDER, subject) for arg in shlex.split(card.invocation)]


def run_tool(card: ToolCard, targets: Iterable[Target], subject: str,
             timeout: float = DEFAULT_TIMEOUT, *, run_id: str | None = None,
             params: Mapping[str, str] | None = None, cwd: str | Path | None = None) -> ToolRun:
    """Spawn the card's invocation and collect its events.

    Raises a :class:`ToolRunError` subclass on failure; the exception's
    ``run`` attribute holds the events read so far.
    """
    if timeout <= 0:
        raise ValueError("timeout must be positive")
    metrics = tuple(sorted({t.metric_id for t in targets}))
    request = RunRequest(run_id or str(uuid.uuid4()), metrics, subject, dict(params or {}),
                         card.protocol_version)
    run = ToolRun(card.tool_id, request.run_id)
    deadline = time.monotonic() + timeout

    try:
        proc = subprocess.Popen(
            build_argv(card, subject), cwd=cwd,
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    except (OSError, ValueError) as exc:
        raise SpawnError(f"cannot start tool: {exc}", run) from exc

    lines: queue.Queue = queue.Queue()
    stderr_tail: deque = deque(maxlen=50)
    threading.Thread(target=_pump, args=(proc.stdout, lines), daemon=True).start()
    threading.Thread(target=_drain, args=(proc.stderr, stderr_tail), daemon=True).start()
    try:
        proc.stdin.write((canonical_dumps(request.to_dict()) + "\n").encode("utf-8"))
        proc.stdin.close()
    except (BrokenPipeError, OSError):
        pass

    def fail(exc_type: type[ToolRunError], message: str) -> ToolRunError:
        _kill(proc)
        run.returncode = proc.returncode
        run.stderr_tail = list(stderr_tail)
        return exc_type(message, run)

    seen_hello = False
    while True:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise fail(ToolTimeout, f"no done event within {timeout:g}s")
        try:
            raw = lines.get(timeout=remaining)
        except queue.Empty:
            raise fail(ToolTimeout, f"no done event within {timeout:g}s") from None
        if raw is _EOF:
            break
        try:
            obj = decode(raw.rstrip(b"\r\n"))
        except (ValueError, UnicodeDecodeError):
            raise fail(ProtocolViolation, f"non-JSON line: {raw[:80]!r}") from None
        problem = check_event(obj, seen_hello, card.protocol_version)
        if problem:
            raise fail(ProtocolViolation, problem)
        seen_hello = True
        run.events.append(obj)
        if obj["event"] == "done":
            break

    try:
        proc.wait(timeout=max(deadline - time.monotonic(), 0.001))
    except subprocess.TimeoutExpired:
        raise fail(ToolTimeout, f"tool did not exit within {timeout:g}s") from None
    run.returncode = proc.returncode
    run.stderr_tail = list(stderr_tail)
    if proc.returncode != 0:
        raise ToolExitError(f"exit status {proc.returncode}", run)
    if run.done_status is None:
        raise ProtocolViolation("output ended without a done event", run)
    return run


def normalize_events(run: ToolRun, card: ToolCard, targets: Iterable[Target], *,
                     spec_hash: str, timestamp: str,
                     mappings: Mapping[str, str] | None = None) -> list[EvidenceRecord]:
    """Turn one invocation into evidence records (``seq`` is assigned by the log).

    A successful run yields one ``measured`` record per (event, planned
    target of that metric), one ``unmapped`` record per event whose metric is
    not planned, and ``missing`` for planned targets without evidence. A
    failed, timed-out or violating run yields ``error`` for every target.
    Approved ``mappings`` (emitted id -> metric id) re-route unmapped events.
    """
    targets = sorted(set(targets))
    by_metric: dict[str, list[Target]] = defaultdict(list)
    for t in targets:
        by_metric[t.metric_id].append(t)

    def record(status: str, requirement_id, metric_id, definition_id, value=None,
               instances=None, event_index=None) -> EvidenceRecord:
        return EvidenceRecord(
            seq=0, run_id=run.run_id, spec_hash=spec_hash, requirement_id=requirement_id,
            metric_id=metric_id, definition_id=definition_id, tool_id=card.tool_id,
            tool_version=card.version, status=status, timestamp=timestamp, value=value,
            instances=instances, event_index=event_index)

    if not run.succeeded:
        return [record("error", t.requirement_id, t.metric_id, t.definition_id) for t in targets]

    out: list[EvidenceRecord] = []
    covered: set[Target] = set()
    for idx, evt in enumerate(run.events):
        if evt.get("event") != "evidence":
            continue
        emitted = evt["metric_id"]
        inst = evt.get("instances")
        instances = None if inst is None else tuple(Instance(i["instance_id"], i["value"]) for i in inst)
        metric = emitted if emitted in by_metric else (mappings or {}).get(emitted)
        if metric in by_metric:
            for t in by_metric[metric]:
                out.append(record("measured", t.requirement_id, t.metric_id, t.definition_id,
                                  evt["value"], instances, idx))
                covered.add(t)
        else:
            out.append(record("unmapped", None, emitted, None, evt["value"], instances, idx))
    for t in targets:
        if t not in covered:
            out.append(record("missing", t.requirement_id, t.metric_id, t.definition_id))
    return out


@dataclass(frozen=True)
class MappingProposal:
    emitted_id: str
    proposed_metric_id: str
    basis: str = "exact_label_match"
    approved: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "emitted_id": self.emitted_id,
            "proposed_metric_id": self.proposed_metric_id,
            "basis": self.basis,
            "approved": self.approved,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> MappingProposal:
        return cls(d["emitted_id"], d["proposed_metric_id"], d.get("basis", "exact_label_match"),
                   bool(d.get("approved", False)))


def propose_mappings(unmapped: Iterable[EvidenceRecord | str],
                     ont: Ontology) -> tuple[list[MappingProposal], list[Finding]]:
    """Propose a metric for each unmapped emitted id whose ontology label matches exactly."""
    emitted = sorted({u if isinstance(u, str) else u.metric_id for u in unmapped
                      if isinstance(u, str) or u.status == "unmapped"})
    proposals, findings = [], []
    for eid in emitted:
        candidates = [m for m in ont.metrics_labelled(eid) if ont.definition_of(m) is not None]
        if len(candidates) == 1:
            proposals.append(MappingProposal(eid, candidates[0]))
        elif len(candidates) > 1:
            findings.append(Finding(
                "ambiguous_label",
                f"label {eid!r} matches several metrics: {', '.join(candidates)}",
                (eid, *candidates), severity="warning"))
    return proposals, findings


def merge_proposals(existing: Iterable[MappingProposal],
                    new: Iterable[MappingProposal]) -> list[MappingProposal]:
    """Union keyed by (emitted, proposed); existing approvals survive."""
    table = {(p.emitted_id, p.proposed_metric_id): p for p in new}
    table.update({(p.emitted_id, p.proposed_metric_id): p for p in existing})
    return sorted(table.values(), key=lambda p: (p.emitted_id, p.proposed_metric_id))


def approve_mapping(proposals: Iterable[MappingProposal], emitted_id: str, metric_id: str,
                    ont: Ontology) -> list[MappingProposal]:
    if ont.definition_of(metric_id) is None:
        raise ValueError(f"metric {metric_id} is not defined in the ontology")
    out, hit = [], False
    for p in proposals:
        if p.emitted_id == emitted_id and p.proposed_metric_id == metric_id:
            p = MappingProposal(p.emitted_id, p.proposed_metric_id, p.basis, True)
            hit = True
        out.append(p)
    if not hit:
        raise ValueError(f"no proposal maps {emitted_id!r} to {metric_id}")
    return out


def approved_mappings(proposals: Iterable[MappingProposal], ont: Ontology | None = None) -> dict[str, str]:
    out = {}
    for p in proposals:
        if p.approved and (ont is None or ont.definition_of(p.proposed_metric_id) is not None):
            out[p.emitted_id] = p.proposed_metric_id
    return out


def load_mappings(path: str | Path) -> list[MappingProposal]:
    path = Path(path)
    if not path.exists():
        return []
    return [MappingProposal.from_dict(d) for d in json.loads(path.read_text(encoding="utf-8"))]


def save_mappings(path: str | Path, proposals: Iterable[MappingProposal]) -> None:
    items = sorted(proposals, key=lambda p: (p.emitted_id, p.proposed_metric_id))
    Path(path).write_text(
        json.dumps([p.to_dict() for p in items], indent=2, sort_keys=True) + "\n", encoding="utf-8")
