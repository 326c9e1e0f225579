"""End-to-end run: parse, merge, resolve, plan, execute, normalize, report."""

from __future__ import annotations

import logging
import re
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from aits.canonical import canonical_serialize
from aits.dsl import EffectiveSpec, merge, parse_extensions, parse_spec
from aits.config import EngineConfig
from aits.errors import AitsError, ConfigError
from aits.evidence import EvidenceLog, EvidenceRecord
from aits.ontology import Ontology, load_triples
from aits.registry import AssessmentPlan, Catalogue, load_catalogue, plan_assessment
from aits.report import MODES, SCENARIOS, build_report
from aits.runner import (
    ToolRunError,
    approved_mappings,
    load_mappings,
    merge_proposals,
    normalize_events,
    propose_mappings,
    run_tool,
    save_mappings,
)

log = logging.getLogger(__name__)

EXIT_PASS, EXIT_FAIL, EXIT_UNASSESSED = 0, 1, 2
_RUN_NAMESPACE = uuid.UUID("5b0c1f8e-4f7e-4c8e-9a43-2a1e6f0d7c11")
_RFC3339_UTC = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?Z")


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z")


def check_clock(clock: str) -> str:
    if not _RFC3339_UTC.fullmatch(clock):
        raise ConfigError(f"--clock must be an RFC 3339 UTC timestamp like 2026-01-01T00:00:00Z, got {clock!r}")
    return clock


@dataclass
class PipelineResult:
    exit_code: int
    output_dir: Path
    report: dict[str, Any] | None = None
    plan: AssessmentPlan | None = None
    records: list[EvidenceRecord] = field(default_factory=list)
    error: dict[str, Any] | None = None


def load_effective(spec_path: str | Path, ext_paths: list[str | Path] = ()) -> EffectiveSpec:
    core = parse_spec(Path(spec_path).read_bytes())
    exts = []
    for p in ext_paths:
        exts.extend(parse_extensions(Path(p).read_bytes()))
    return merge(core, exts)


def load_ontology(config: EngineConfig, check: bool = True) -> Ontology:
    if config.ontology_path is None:
        raise ConfigError("no ontology configured (--ontology, AITS_ONTOLOGY or aits.toml)")
    try:
        source = Path(config.ontology_path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read ontology: {exc}") from exc
    return load_triples(source, check=check)


def outcome(report: dict[str, Any], mode: str) -> int:
    summary = report["summary"]
    if summary["fail"] and mode == "assessment":
        return EXIT_FAIL
    if summary["unassessed"]:
        return EXIT_UNASSESSED
    return EXIT_PASS


def execute_plan(plan: AssessmentPlan, catalogue: Catalogue, config: EngineConfig, *,
                 subject: str, timestamp: str, deterministic_ids: bool,
                 mappings: dict[str, str] | None = None) -> list[EvidenceRecord]:
    """Run every selected tool (bounded parallelism) and return records in a stable order."""
    def one(tool_id: str) -> list[EvidenceRecord]:
        card = catalogue.card(tool_id)
        targets = plan.slice_for(tool_id)
        if deterministic_ids:
            run_id = str(uuid.uuid5(_RUN_NAMESPACE, f"{plan.spec_hash}:{tool_id}:{timestamp}"))
        else:
            run_id = str(uuid.uuid4())
        source = catalogue.sources.get(tool_id)
        cwd = Path(source).parent if source else None
        try:
            run = run_tool(card, targets, subject, config.timeout_seconds, run_id=run_id, cwd=cwd)
        except ToolRunError as exc:
            run = exc.run
        return normalize_events(run, card, targets, spec_hash=plan.spec_hash,
                                timestamp=timestamp, mappings=mappings)

    tools = sorted(plan.selected_tools)
    with ThreadPoolExecutor(max_workers=config.max_parallel_tools) as pool:
        batches = list(pool.map(one, tools))
    records = [r for batch in batches for r in batch]
    records.sort(key=lambda r: (r.tool_id, -1 if r.event_index is None else r.event_index,
                                r.requirement_id or "", r.metric_id, r.status))
    return records


def write_json(path: Path, obj: Any) -> None:
    path.write_bytes(canonical_serialize(obj))


def run_pipeline(spec_path: str | Path, ext_paths: list[str | Path], scenario: str, mode: str,
                 config: EngineConfig, *, clock: str | None = None) -> PipelineResult:
    """Run the full workflow, writing plan.json, evidence.ndjson and report.json.

    Exit codes: 0 all pass, 1 a requirement fails (assessment mode only),
    2 unassessed requirements remain, >= 10 engine error (error.json written).
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
        timestamp = check_clock(clock) if clock else utc_now()

        eff = load_effective(spec_path, ext_paths)
        ont = load_ontology(config)
        catalogue = load_catalogue(config.catalogue_paths, ont)
        for f in catalogue.findings:
            log.warning("card excluded: %s", f.message)
        plan = plan_assessment(eff, ont, catalogue)
        write_json(out / "plan.json", plan.to_dict())

        evidence_log = EvidenceLog(out / "evidence.ndjson")
        mapping_file = out / "mappings.json"
        proposals = load_mappings(mapping_file)
        records = execute_plan(
            plan, catalogue, config, subject=config.subject or eff.core.name,
            timestamp=timestamp, deterministic_ids=clock is not None,
            mappings=approved_mappings(proposals, ont))

        sealed = evidence_log.extend(records)

        new, _ = propose_mappings([r for r in sealed if r.status == "unmapped"], ont)
        if new or proposals:
            save_mappings(mapping_file, merge_proposals(proposals, new))

        report = build_report(eff, plan, sealed, scenario, mode, generated_at=timestamp)
        write_json(out / "report.json", report)
        return PipelineResult(outcome(report, mode), out, report, plan, sealed)
    except AitsError as exc:
        error = {
            "exit_code": exc.exit_code,
            "error": type(exc).__name__,
            "message": str(exc),
            "findings": [f.to_dict() for f in getattr(exc, "findings", [])],
        }
        write_json(out / "error.json", error)
        return PipelineResult(exc.exit_code, out, error=error)
    except OSError as exc:
        error = {"exit_code": 16, "error": type(exc).__name__, "message": str(exc), "findings": []}
        write_json(out / "error.json", error)
        return PipelineResult(16, out, error=error)

