"""Tool cards, the open catalogue, and deterministic assessment planning."""

from __future__ import annotations

import json
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from aits.dsl.model import IDENT_RE, QID_RE, VERSION_RE, EffectiveSpec
from aits.dsl.format import spec_hash
from aits.errors import CatalogueError, Finding
from aits.ontology import MetricDefinition, Ontology, resolve_metrics

SUPPORTED_PROTOCOLS = (1,)
PLACEHOLDER = "{subject}"

CARD_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "tool_id", "name", "version", "metrics", "supported_system_types",
        "deterministic", "invocation", "protocol_version",
    ],
    "properties": {
        "tool_id": {"type": "string", "pattern": f"^{IDENT_RE.pattern}$"},
        "name": {"type": "string", "minLength": 1},
        "version": {"type": "string", "pattern": f"^{VERSION_RE.pattern}$"},
        "metrics": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["metric_id", "definition_id"],
                "properties": {
                    "metric_id": {"type": "string", "pattern": f"^{QID_RE.pattern}$"},
                    "definition_id": {"type": "string", "minLength": 1},
                },
            },
        },
        "supported_system_types": {
            "type": "array",
            "minItems": 1,
            "uniqueItems": True,
            "items": {"type": "string", "pattern": f"^{IDENT_RE.pattern}$"},
        },
        "deterministic": {"type": "boolean"},
        "invocation": {"type": "string", "minLength": 1},
        "protocol_version": {"type": "integer", "minimum": 1},
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(CARD_SCHEMA)


@dataclass(frozen=True)
class ToolCard:
    tool_id: str
    name: str
    version: str
    metrics: tuple[MetricDefinition, ...]
    supported_system_types: tuple[str, ...]
    deterministic: bool
    invocation: str
    protocol_version: int

    def supports(self, metric_id: str, definition_id: str | None) -> bool:
        return definition_id is not None and MetricDefinition(metric_id, definition_id) in self.metrics

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool_id": self.tool_id,
            "name": self.name,
            "version": self.version,
            "metrics": [{"metric_id": m.metric_id, "definition_id": m.definition_id} for m in self.metrics],
            "supported_system_types": list(self.supported_system_types),
            "deterministic": self.deterministic,
            "invocation": self.invocation,
            "protocol_version": self.protocol_version,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ToolCard:
        return cls(
            tool_id=data["tool_id"],
            name=data["name"],
            version=data["version"],
            metrics=tuple(MetricDefinition(m["metric_id"], m["definition_id"]) for m in data["metrics"]),
            supported_system_types=tuple(data["supported_system_types"]),
            deterministic=data["deterministic"],
            invocation=data["invocation"],
            protocol_version=int(data["protocol_version"]),
        )


def _schema_findings(data: Any) -> list[Finding]:
    out = []
    for err in sorted(_VALIDATOR.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        where = "/".join(str(p) for p in err.absolute_path) or "<card>"
        if err.validator == "additionalProperties":
            code = "unknown_field"
        elif err.validator == "minItems" and list(err.absolute_path) == ["metrics"]:
            out.append(Finding("empty_metrics", "metrics must be non-empty", ("metrics",)))
            continue
        elif err.validator == "required":
            code = "missing_field"
        else:
            code = "schema"
        out.append(Finding(code, f"{where}: {err.message}", (where,)))
    return out


def lint_card(source: str | bytes | dict, ont: Ontology) -> tuple[ToolCard | None, list[Finding]]:
    """Validate a card against the schema and the ontology.

    Returns ``(card, [])`` when valid, otherwise ``(None, findings)`` with
    every problem found.
    """
    if isinstance(source, dict):
        data: Any = source
    else:
        try:
            data = json.loads(source)
        except (ValueError, UnicodeDecodeError) as exc:
            return None, [Finding("invalid_json", f"card is not valid JSON: {exc}")]

    findings = _schema_findings(data)
    if not isinstance(data, dict):
        return None, findings

    invocation = data.get("invocation")
    if isinstance(invocation, str) and invocation.count(PLACEHOLDER) != 1:
        findings.append(Finding(
            "invocation_placeholder",
            f"invocation must contain {PLACEHOLDER} exactly once (found {invocation.count(PLACEHOLDER)})",
            ("invocation",)))
    proto = data.get("protocol_version")
    if isinstance(proto, int) and not isinstance(proto, bool) and proto >= 1 and proto not in SUPPORTED_PROTOCOLS:
        findings.append(Finding("unsupported_protocol", f"protocol_version {proto} is not supported",
                                ("protocol_version",)))

    metrics = data.get("metrics")
    if isinstance(metrics, list):
        seen: set[str] = set()
        for entry in metrics:
            if not isinstance(entry, dict):
                continue
            mid, did = entry.get("metric_id"), entry.get("definition_id")
            if not isinstance(mid, str):
                continue
            if mid in seen:
                findings.append(Finding("duplicate_metric", f"metric {mid} listed twice", (mid,)))
            seen.add(mid)
            known = ont.definition_of(mid)
            if known is None:
                findings.append(Finding("unknown_metric", f"metric {mid} is not defined in the ontology", (mid,)))
            elif isinstance(did, str) and did != known:
                findings.append(Finding(
                    "definition_mismatch",
                    f"definition mismatch for {mid}: card claims {did}, ontology says {known}",
                    (mid, did, known)))

    if findings:
        return None, findings
    return ToolCard.from_dict(data), []


@dataclass(frozen=True)
class Catalogue:
    cards: tuple[ToolCard, ...] = ()
    sources: dict[str, str] = field(default_factory=dict, compare=False)
    findings: tuple[Finding, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.cards)

    def card(self, tool_id: str) -> ToolCard:
        for c in self.cards:
            if c.tool_id == tool_id:
                return c
        raise KeyError(tool_id)

    @classmethod
    def from_cards(cls, cards: Iterable[ToolCard]) -> Catalogue:
        cards = tuple(cards)
        ids = [c.tool_id for c in cards]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise CatalogueError(f"duplicate tool_id: {', '.join(dup)}")
        return cls(cards)


def _expand(paths: Iterable[str | Path]) -> list[Path]:
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("*.card.json")))
        else:
            out.append(p)
    return out


def load_catalogue(paths: Iterable[str | Path], ont: Ontology) -> Catalogue:
    """Load card files (directories expand to their ``*.card.json``).

    Invalid cards are excluded and reported in ``Catalogue.findings``; a
    tool_id defined by two files raises :class:`CatalogueError`.
    """
    cards: list[ToolCard] = []
    sources: dict[str, str] = {}
    findings: list[Finding] = []
    for path in _expand(paths):
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise CatalogueError(f"cannot read card {path}: {exc}") from exc
        card, problems = lint_card(raw, ont)
        if card is None:
            findings.extend(
                Finding(f.code, f"{path}: {f.message}", (str(path), *f.subjects), f.severity) for f in problems)
            continue
        if card.tool_id in sources:
            raise CatalogueError(
                f"duplicate tool_id {card.tool_id} in {sources[card.tool_id]} and {path}",
                [Finding("duplicate_tool_id", f"tool_id {card.tool_id} defined twice",
                         (card.tool_id, sources[card.tool_id], str(path)))])
        sources[card.tool_id] = str(path)
        cards.append(card)
    return Catalogue(tuple(cards), sources, tuple(findings))


@dataclass(frozen=True, order=True)
class Target:
    requirement_id: str
    metric_id: str
    definition_id: str | None


@dataclass(frozen=True, order=True)
class Assignment:
    requirement_id: str
    metric_id: str
    definition_id: str
    tool_id: str

    @property
    def target(self) -> Target:
        return Target(self.requirement_id, self.metric_id, self.definition_id)


@dataclass(frozen=True, order=True)
class Gap:
    requirement_id: str
    metric_id: str
    definition_id: str | None
    reason: str  # no_supporting_tool | system_type_unsupported


@dataclass(frozen=True)
class AssessmentPlan:
    spec_hash: str
    system_type: str
    assignments: tuple[Assignment, ...]
    gaps: tuple[Gap, ...]
    selected_tools: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def targets(self) -> frozenset[Target]:
        return frozenset(a.target for a in self.assignments) | frozenset(
            Target(g.requirement_id, g.metric_id, g.definition_id) for g in self.gaps)

    def slice_for(self, tool_id: str) -> list[Target]:
        return [a.target for a in self.assignments if a.tool_id == tool_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "spec_hash": self.spec_hash,
            "system_type": self.system_type,
            "assignments": [vars(a) for a in self.assignments],
            "gaps": [vars(g) for g in self.gaps],
            "selected_tools": list(self.selected_tools),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AssessmentPlan:
        return cls(
            spec_hash=data["spec_hash"],
            system_type=data["system_type"],
            assignments=tuple(Assignment(**a) for a in data["assignments"]),
            gaps=tuple(Gap(**g) for g in data["gaps"]),
            selected_tools=tuple(data.get("selected_tools", ())),
            warnings=tuple(data.get("warnings", ())),
        )


def collect_targets(eff: EffectiveSpec, ont: Ontology,
                    findings: list[Finding] | None = None) -> frozenset[Target]:
    """Ontology-resolved metrics plus explicit bindings, per requirement."""
    targets: set[Target] = set()
    for req in eff.requirements:
        for md in resolve_metrics(ont, req.id, eff.system_type, findings):
            targets.add(Target(req.id, md.metric_id, md.definition_id))
        for b in req.bindings:
            targets.add(Target(req.id, b.metric_id, ont.definition_of(b.metric_id)))
    return frozenset(targets)


def greedy_cover(targets: Iterable[Target], cards: Iterable[ToolCard],
                 system_type: str) -> tuple[dict[Target, str], list[str]]:
    """Greedy set cover; ties go to the lexicographically smallest tool_id.

    Returns the target -> tool_id assignment and the tools in selection order.
    """
    cards = sorted(cards, key=lambda c: c.tool_id)
    uncovered = set(targets)
    covers = {
        c.tool_id: {t for t in uncovered if system_type in c.supported_system_types
                    and c.supports(t.metric_id, t.definition_id)}
        for c in cards
    }
    assigned: dict[Target, str] = {}
    order: list[str] = []
    while uncovered:
        best, gain = None, 0
        for c in cards:
            n = len(covers[c.tool_id] & uncovered)
            if n > gain:
                best, gain = c.tool_id, n
        if best is None:
            break
        newly = covers[best] & uncovered
        for t in newly:
            assigned[t] = best
        uncovered -= newly
        order.append(best)
    return assigned, order


def plan_assessment(eff: EffectiveSpec, ont: Ontology, cat: Catalogue) -> AssessmentPlan:
    findings: list[Finding] = []
    targets = collect_targets(eff, ont, findings)
    assigned, order = greedy_cover(targets, cat.cards, eff.system_type)

    assignments = sorted(
        Assignment(t.requirement_id, t.metric_id, t.definition_id, tool)
        for t, tool in assigned.items())
    gaps = []
    for t in sorted(targets - assigned.keys(), key=lambda t: (t.requirement_id, t.metric_id)):
        anywhere = any(c.supports(t.metric_id, t.definition_id) for c in cat.cards)
        reason = "system_type_unsupported" if anywhere else "no_supporting_tool"
        gaps.append(Gap(t.requirement_id, t.metric_id, t.definition_id, reason))
    return AssessmentPlan(
        spec_hash=spec_hash(eff),
        system_type=eff.system_type,
        assignments=tuple(assignments),
        gaps=tuple(gaps),
        selected_tools=tuple(order),
        warnings=tuple(sorted(f.message for f in findings)),
    )
