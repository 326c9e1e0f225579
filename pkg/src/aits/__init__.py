"""AI technical sandbox engine.

Specify assessment obligations in a layered DSL, resolve them to metrics
through a reference ontology, plan and run external assessment tools, and
emit hash-chained evidence, per-run reports and meso-level signals.
"""

from aits.aggregate import aggregate_reports, detect_gaps
from aits.canonical import canonical_serialize
from aits.dsl import format_spec, merge, parse_extension, parse_extensions, parse_spec, spec_hash
from aits.evidence import EvidenceLog, EvidenceRecord, verify_chain
from aits.ontology import Ontology, check_consistency, load_triples, resolve_metrics
from aits.registry import Catalogue, ToolCard, lint_card, load_catalogue, plan_assessment
from aits.report import build_report
from aits.runner import normalize_events, propose_mappings, run_tool

__version__ = "0.1.0"

__all__ = [
    "Catalogue",
    "EvidenceLog",
    "EvidenceRecord",
    "Ontology",
    "ToolCard",
    "aggregate_reports",
    "build_report",
    "canonical_serialize",
    "check_consistency",
    "detect_gaps",
    "format_spec",
    "lint_card",
    "load_catalogue",
    "load_triples",
    "merge",
    "normalize_events",
    "parse_extension",
    "parse_extensions",
    "parse_spec",
    "plan_assessment",
    "propose_mappings",
    "resolve_metrics",
    "run_tool",
    "spec_hash",
    "verify_chain",
]
