"""Meso-level aggregation of many assessment reports into one signal."""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from aits.canonical import canonical_hash, decode
from aits.errors import AggregationError, IncomparabilityError
from aits.report import verify_report

POLICIES = ("strict", "partition")
DEFAULT_GAP_THRESHOLD = 0.25


def load_reports(paths: Iterable[str | Path]) -> list[dict[str, Any]]:
    """Read report files; a directory contributes every ``*.json`` below it."""
    files: list[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(f for f in p.rglob("*.json") if f.name != "plan.json"
                                and f.name != "signal.json" and f.name != "error.json"))
        else:
            files.append(p)
    reports = []
    for f in files:
        try:
            reports.append(decode(f.read_bytes()))
        except (OSError, ValueError) as exc:
            raise AggregationError(f"cannot decode report {f}: {exc}") from exc
    return reports


def _check(reports: Sequence[dict[str, Any]]) -> None:
    if not reports:
        raise AggregationError("no reports to aggregate")
    for i, r in enumerate(reports):
        if not isinstance(r, dict) or not verify_report(r):
            raise AggregationError(f"report {i} is corrupted: report_hash does not match content")


def detect_gaps(reports: Sequence[dict[str, Any]],
                threshold: float = DEFAULT_GAP_THRESHOLD) -> list[dict[str, Any]]:
    """Requirements unassessed in strictly more than ``threshold`` of the reports containing them."""
    seen: dict[str, int] = defaultdict(int)
    unassessed: dict[str, int] = defaultdict(int)
    for r in reports:
        for v in r["verdicts"]:
            seen[v["requirement_id"]] += 1
            if v["verdict"] == "unassessed":
                unassessed[v["requirement_id"]] += 1
    gaps = []
    for rid, total in seen.items():
        fraction = unassessed[rid] / total
        if fraction > threshold:
            gaps.append({"requirement_id": rid, "unassessed_fraction": fraction,
                         "unassessed": unassessed[rid], "reports": total})
    gaps.sort(key=lambda g: (-g["unassessed_fraction"], g["requirement_id"]))
    return gaps


def aggregate_reports(reports: Sequence[dict[str, Any]], policy: str = "strict",
                      gap_threshold: float = DEFAULT_GAP_THRESHOLD) -> dict[str, Any]:
    """Group observed binding values by (requirement, metric, definition).

    A metric seen under two definitions is never pooled: ``strict`` raises
    :class:`IncomparabilityError`, ``partition`` keeps separate groups and
    lists the metric under ``incomparabilities``.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    _check(reports)

    definitions: dict[str, set[str]] = defaultdict(set)
    values: dict[tuple[str, str, str | None], list[float]] = defaultdict(list)
    passed: dict[tuple[str, str, str | None], int] = defaultdict(int)
    for r in reports:
        for v in r["verdicts"]:
            for b in v["bindings"]:
                if b["definition_id"] is not None:
                    definitions[b["metric_id"]].add(b["definition_id"])
                if b["observed"] is None:
                    continue
                key = (v["requirement_id"], b["metric_id"], b["definition_id"])
                values[key].append(b["observed"])
                passed[key] += bool(b["satisfied"])

    offenders = {m: sorted(d) for m, d in definitions.items() if len(d) > 1}
    if offenders and policy == "strict":
        raise IncomparabilityError(offenders)

    groups = []
    for key in sorted(values, key=lambda k: (k[0], k[1], k[2] or "")):
        vs = values[key]
        n = len(vs)
        groups.append({
            "requirement_id": key[0],
            "metric_id": key[1],
            "definition_id": key[2],
            "n": n,
            "mean": math.fsum(vs) / n,
            "min": min(vs),
            "max": max(vs),
            "pass_rate": passed[key] / n,
        })

    signal: dict[str, Any] = {
        "level": "meso",
        "report_count": len(reports),
        "preliminary_reports": sum(1 for r in reports if r.get("preliminary")),
        "policy": policy,
        "gap_threshold": gap_threshold,
        "groups": groups,
        "coverage_gaps": detect_gaps(reports, gap_threshold),
        "incomparabilities": [{"metric_id": m, "definition_ids": d} for m, d in sorted(offenders.items())],
        "unmapped_evidence": sum(r.get("unmapped", {}).get("count", 0) for r in reports),
    }
    signal["signal_hash"] = canonical_hash(signal)
    return signal
