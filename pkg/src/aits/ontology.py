"""Reference ontology of metrics as a closed-vocabulary triple set.

Five predicates are understood::

    m.a   measures          AIA.Art10
    m.a   hasDefinition     def:3f2a...
    m.a   appliesTo         classifier
    R.sub subRequirementOf  AIA.Art10
    m.a   label             "demographic parity difference"

Evidence for a sub-requirement counts toward its parent, so resolution
closes over the descendants of the queried requirement.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field

from aits.dsl.model import IDENT_RE, QID_RE
from aits.errors import Finding, OntologyError

PREDICATES = ("measures", "hasDefinition", "appliesTo", "subRequirementOf", "label")

_LINE_RE = re.compile(r"(\S+)\s+(\S+)\s+(.*)")
_QUOTED_RE = re.compile(r'"(?:[^"\\]|\\.)*"')
_CONTENT_ID_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.-]*:[A-Za-z0-9._~-]+")


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    predicate: str
    object: str

    def __str__(self) -> str:
        obj = json.dumps(self.object, ensure_ascii=False) if self.predicate == "label" else self.object
        return f"{self.subject} {self.predicate} {obj}"


@dataclass(frozen=True, order=True)
class MetricDefinition:
    metric_id: str
    definition_id: str


@dataclass(frozen=True, eq=False)
class Ontology:
    """Immutable triple set with derived indexes. Equality compares triples only."""

    triples: frozenset[Triple] = frozenset()
    _definitions: dict[str, frozenset[str]] = field(default_factory=dict, init=False, repr=False)
    _applies: dict[str, frozenset[str]] = field(default_factory=dict, init=False, repr=False)
    _measures: dict[str, frozenset[str]] = field(default_factory=dict, init=False, repr=False)
    _children: dict[str, frozenset[str]] = field(default_factory=dict, init=False, repr=False)
    _labels: dict[str, frozenset[str]] = field(default_factory=dict, init=False, repr=False)
    _requirements: frozenset[str] = field(default=frozenset(), init=False, repr=False)

    def __post_init__(self) -> None:
        by_pred: dict[str, dict[str, set[str]]] = {p: defaultdict(set) for p in PREDICATES}
        reqs: set[str] = set()
        for t in self.triples:
            if t.predicate == "subRequirementOf":
                # parent -> children
                by_pred[t.predicate][t.object].add(t.subject)
                reqs.update((t.subject, t.object))
            else:
                by_pred[t.predicate][t.subject].add(t.object)
                if t.predicate == "measures":
                    reqs.add(t.object)

        def freeze(d: dict[str, set[str]]) -> dict[str, frozenset[str]]:
            return {k: frozenset(v) for k, v in d.items()}

        object.__setattr__(self, "_definitions", freeze(by_pred["hasDefinition"]))
        object.__setattr__(self, "_applies", freeze(by_pred["appliesTo"]))
        object.__setattr__(self, "_measures", freeze(by_pred["measures"]))
        object.__setattr__(self, "_children", freeze(by_pred["subRequirementOf"]))
        object.__setattr__(self, "_labels", freeze(by_pred["label"]))
        object.__setattr__(self, "_requirements", frozenset(reqs))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ontology):
            return NotImplemented
        return self.triples == other.triples

    def __hash__(self) -> int:
        return hash(self.triples)

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def metrics(self) -> frozenset[str]:
        return frozenset(self._definitions) | frozenset(self._measures) | frozenset(self._applies)

    def definition_of(self, metric_id: str) -> str | None:
        defs = self._definitions.get(metric_id)
        if not defs or len(defs) != 1:
            return None
        return next(iter(defs))

    def system_types_of(self, metric_id: str) -> frozenset[str]:
        return self._applies.get(metric_id, frozenset())

    def labels_of(self, metric_id: str) -> frozenset[str]:
        return self._labels.get(metric_id, frozenset())

    def metrics_labelled(self, label: str) -> list[str]:
        return sorted(m for m, labels in self._labels.items() if label in labels)

    def knows_requirement(self, requirement_id: str) -> bool:
        return requirement_id in self._requirements

    def descendants(self, requirement_id: str) -> frozenset[str]:
        """Reflexive-transitive closure of ``subRequirementOf`` below ``requirement_id``."""
        seen = {requirement_id}
        stack = [requirement_id]
        while stack:
            for child in self._children.get(stack.pop(), ()):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return frozenset(seen)

    def sub_requirement_edges(self) -> dict[str, frozenset[str]]:
        return dict(self._children)


def _parse_line(raw: str, lineno: int) -> Triple | None:
    text = raw.strip()
    if not text or text.startswith("#"):
        return None
    m = _LINE_RE.fullmatch(text)
    if m is None:
        raise OntologyError(f"line {lineno}: expected 'subject predicate object'")
    subject, predicate, rest = m.groups()
    if predicate not in PREDICATES:
        raise OntologyError(f"line {lineno}: unknown predicate {predicate!r}")
    if QID_RE.fullmatch(subject) is None:
        raise OntologyError(f"line {lineno}: subject {subject!r} is not a qualified identifier")

    if predicate == "label":
        q = _QUOTED_RE.match(rest)
        if q is None:
            raise OntologyError(f"line {lineno}: label object must be a double-quoted string")
        obj = json.loads(q.group())
        tail = rest[q.end():].strip()
    else:
        parts = rest.split(None, 1)
        obj = parts[0]
        tail = parts[1].strip() if len(parts) > 1 else ""
        if predicate == "hasDefinition":
            ok = _CONTENT_ID_RE.fullmatch(obj) is not None
        elif predicate == "appliesTo":
            ok = IDENT_RE.fullmatch(obj) is not None
        else:
            ok = QID_RE.fullmatch(obj) is not None
        if not ok:
            raise OntologyError(f"line {lineno}: malformed object {obj!r} for {predicate}")
    if tail and not tail.startswith("#"):
        raise OntologyError(f"line {lineno}: trailing content {tail!r}")
    return Triple(subject, predicate, obj)


def parse_triples(source: str | bytes) -> frozenset[Triple]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    triples = set()
    for lineno, raw in enumerate(source.splitlines(), start=1):
        t = _parse_line(raw, lineno)
        if t is not None:
            triples.add(t)
    return frozenset(triples)


def load_triples(source: str | bytes, *, check: bool = True) -> Ontology:
    """Parse a `.aitso` text into an :class:`Ontology`.

    With ``check`` (the default) any consistency finding aborts the load.
    """
    ont = Ontology(parse_triples(source))
    if check:
        findings = check_consistency(ont)
        if findings:
            raise OntologyError(
                "inconsistent ontology: " + "; ".join(f.message for f in findings), findings)
    return ont


def _cycles(children: dict[str, frozenset[str]]) -> list[list[str]]:
    """Strongly connected components that contain a cycle (Tarjan, iterative)."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = 0
    nodes = sorted(set(children) | {c for cs in children.values() for c in cs})

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(sorted(children.get(root, ()))))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            child = next(it, None)
            if child is not None:
                if child not in index:
                    index[child] = low[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(sorted(children.get(child, ())))))
                elif child in on_stack:
                    low[node] = min(low[node], index[child])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                if len(comp) > 1 or node in children.get(node, ()):
                    out.append(sorted(comp))
    return sorted(out)


def check_consistency(ont: Ontology) -> list[Finding]:
    """Return every consistency finding; an empty list means consistent."""
    findings: list[Finding] = []
    for metric, defs in sorted(ont._definitions.items()):
        if len(defs) > 1:
            findings.append(Finding(
                "duplicate_definition",
                f"metric {metric} has {len(defs)} definitions: {', '.join(sorted(defs))}",
                (metric, *sorted(defs)),
            ))
    needing = set(ont._measures) | set(ont._applies)
    for metric in sorted(needing - set(ont._definitions)):
        findings.append(Finding("undefined_metric", f"metric {metric} has no hasDefinition", (metric,)))
    for comp in _cycles(ont._children):
        findings.append(Finding(
            "cycle", f"subRequirementOf cycle among {{{', '.join(comp)}}}", tuple(comp)))
    return findings


def resolve_metrics(ont: Ontology, requirement_id: str, system_type: str,
                    findings: list[Finding] | None = None) -> frozenset[MetricDefinition]:
    """Metrics measuring ``requirement_id`` or any sub-requirement, filtered by system type.

    An id the ontology has never seen resolves to the empty set; a warning
    finding is appended to ``findings`` when a list is supplied.
    """
    if not ont.knows_requirement(requirement_id):
        if findings is not None:
            findings.append(Finding(
                "unknown_requirement",
                f"requirement {requirement_id} is not covered by the ontology",
                (requirement_id,),
                severity="warning",
            ))
        return frozenset()
    scope = ont.descendants(requirement_id)
    out = set()
    for metric, measured in ont._measures.items():
        if measured.isdisjoint(scope) or system_type not in ont.system_types_of(metric):
            continue
        definition = ont.definition_of(metric)
        if definition is not None:
            out.add(MetricDefinition(metric, definition))
    return frozenset(out)
