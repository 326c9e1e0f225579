"""Per-run assessment reports with per-requirement verdicts."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable
from typing import Any

from aits.canonical import canonical_hash
from aits.dsl.format import spec_hash
from aits.dsl.model import EffectiveSpec, MetricBinding
from aits.errors import EvidenceError
from aits.evidence import EvidenceRecord
from aits.registry import AssessmentPlan

REPORT_VERSION = 1
SCENARIOS = ("self_assessment", "regulatory_sandbox", "notified_body")
MODES = ("development", "assessment")


def worst_value(binding: MetricBinding, values: Iterable[float]) -> float | None:
    """The value least favourable to the binding: max for LE, min for GE."""
    values = list(values)
    if not values:
        return None
    return max(values) if binding.comparator == "LE" else min(values)


def requirement_verdict(satisfied: list[bool | None]) -> str:
    if not satisfied:
        return "unassessed"
    if any(s is False for s in satisfied):
        return "fail"
    if all(s is True for s in satisfied):
        return "pass"
    return "unassessed"


def report_hash(report: dict[str, Any]) -> str:
    return canonical_hash({k: v for k, v in report.items() if k != "report_hash"})


def verify_report(report: dict[str, Any]) -> bool:
    return report.get("report_hash") == report_hash(report)


def build_report(eff: EffectiveSpec, plan: AssessmentPlan, records: Iterable[EvidenceRecord],
                 scenario: str, mode: str, *, generated_at: str | None = None) -> dict[str, Any]:
    """Assemble the canonical report for one run.

    Only ``measured`` records influence verdicts. Unmapped evidence is
    counted in ``unmapped`` but never scored.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    shash = spec_hash(eff)
    if plan.spec_hash != shash:
        raise EvidenceError(f"plan belongs to spec {plan.spec_hash}, not {shash}")
    records = list(records)
    foreign = sorted({r.spec_hash for r in records if r.spec_hash != shash})
    if foreign:
        raise EvidenceError(f"records reference foreign spec_hash: {', '.join(foreign)}")

    tool_for = {(a.requirement_id, a.metric_id): a.tool_id for a in plan.assignments}
    definition_for = {(a.requirement_id, a.metric_id): a.definition_id for a in plan.assignments}
    definition_for.update({(g.requirement_id, g.metric_id): g.definition_id for g in plan.gaps})

    measured: dict[tuple[str, str], list[EvidenceRecord]] = defaultdict(list)
    for r in records:
        if r.status == "measured" and r.requirement_id is not None:
            measured[(r.requirement_id, r.metric_id)].append(r)

    verdicts = []
    bound_keys = set()
    for req in sorted(eff.requirements, key=lambda r: r.id):
        entries = []
        for b in req.bindings:
            key = (req.id, b.metric_id)
            bound_keys.add(key)
            observed = worst_value(b, (r.value for r in measured.get(key, ())))
            entries.append({
                "metric_id": b.metric_id,
                "definition_id": definition_for.get(key),
                "tool_id": tool_for.get(key),
                "comparator": b.comparator,
                "threshold": b.threshold,
                "observed": observed,
                "satisfied": None if observed is None else b.is_satisfied_by(observed),
            })
        entries.sort(key=lambda e: (e["metric_id"], e["tool_id"] or ""))
        verdicts.append({
            "requirement_id": req.id,
            "origin": eff.origins.get(req.id, "core"),
            "verdict": requirement_verdict([e["satisfied"] for e in entries]),
            "bindings": entries,
        })

    observations = []
    for key in sorted(set(measured) - bound_keys):
        by_tool: dict[str, list[EvidenceRecord]] = defaultdict(list)
        for r in measured[key]:
            by_tool[r.tool_id].append(r)
        for tool_id in sorted(by_tool):
            values = [r.value for r in by_tool[tool_id]]
            observations.append({
                "requirement_id": key[0],
                "metric_id": key[1],
                "definition_id": by_tool[tool_id][0].definition_id,
                "tool_id": tool_id,
                "n": len(values),
                "min": min(values),
                "max": max(values),
            })

    gaps = [
        {"requirement_id": g.requirement_id, "metric_id": g.metric_id,
         "definition_id": g.definition_id, "reason": g.reason}
        for g in sorted(plan.gaps, key=lambda g: (g.requirement_id, g.metric_id))
    ]
    tools = sorted({(r.tool_id, r.tool_version, r.run_id) for r in records})
    statuses: dict[str, int] = defaultdict(int)
    for r in records:
        statuses[r.status] += 1
    unmapped_ids = sorted({r.metric_id for r in records if r.status == "unmapped"})
    counts = {v: sum(1 for x in verdicts if x["verdict"] == v) for v in ("pass", "fail", "unassessed")}

    report: dict[str, Any] = {
        "report_version": REPORT_VERSION,
        "scenario": scenario,
        "mode": mode,
        "level": "micro",
        "preliminary": mode == "development",
        "generated_at": generated_at,
        "spec": {
            "name": eff.core.name,
            "version": eff.core.version,
            "system_type": eff.system_type,
            "risk_class": eff.core.risk_class,
        },
        "spec_hash": shash,
        "applied_extensions": list(eff.applied_extensions),
        "verdicts": verdicts,
        "summary": counts,
        "observations": observations,
        "gaps": gaps,
        "tools": [{"tool_id": t, "tool_version": v, "run_id": run} for t, v, run in tools],
        "record_statuses": dict(sorted(statuses.items())),
        "unmapped": {"count": statuses.get("unmapped", 0), "emitted_ids": unmapped_ids},
    }
    report["report_hash"] = report_hash(report)
    return report
