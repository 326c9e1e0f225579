"""`aits` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from aits import aggregate as agg
from aits.canonical import canonical_serialize
from aits.config import EngineConfig, load_config
from aits.dsl import (
    SandboxSpec,
    format_extensions,
    format_spec,
    merge,
    parse_any,
    parse_extensions,
    parse_spec,
    spec_hash,
)
from aits.errors import AitsError
from aits.evidence import EvidenceLog, verify_chain
from aits.ontology import check_consistency, resolve_metrics
from aits.pipeline import load_effective, load_ontology, run_pipeline
from aits.registry import lint_card, load_catalogue, plan_assessment
from aits.report import MODES, SCENARIOS
from aits.runner import approve_mapping, load_mappings, merge_proposals, propose_mappings, save_mappings

EX_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("engine configuration")
    g.add_argument("--config", help="config file (default ./aits.toml if present)")
    g.add_argument("--ontology", dest="ontology_path", help="reference ontology (.aitso)")
    g.add_argument("--catalogue", dest="catalogue_paths", action="append",
                   help="tool card file or directory; repeatable")
    g.add_argument("--timeout", dest="timeout_seconds", type=int, help="per-tool timeout in seconds")
    g.add_argument("--max-parallel", dest="max_parallel_tools", type=int)
    g.add_argument("--gap-threshold", dest="gap_threshold", type=float)
    g.add_argument("--output-dir", dest="output_dir")
    g.add_argument("--subject", help="locator of the system under test")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="aits", description="AI technical sandbox engine")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")
    sub.required = True

    dsl = sub.add_parser("dsl", help="spec language tools").add_subparsers(
        dest="action", parser_class=_Parser, metavar="ACTION")
    dsl.required = True
    p = dsl.add_parser("check", parents=[common], help="parse-only validation")
    p.add_argument("files", nargs="+")
    p = dsl.add_parser("fmt", parents=[common], help="print canonical form")
    p.add_argument("file")
    p.add_argument("--write", action="store_true", help="rewrite the file in place")
    p = dsl.add_parser("hash", parents=[common], help="print canonical SHA-256")
    p.add_argument("file")
    p = dsl.add_parser("merge", parents=[common], help="merge extensions onto a core spec")
    p.add_argument("core")
    p.add_argument("extensions", nargs="*")
    p.add_argument("--hash", action="store_true", help="print only the effective spec hash")

    onto = sub.add_parser("onto", help="ontology tools").add_subparsers(
        dest="action", parser_class=_Parser, metavar="ACTION")
    onto.required = True
    p = onto.add_parser("check", parents=[common], help="report consistency findings")
    p.add_argument("file", nargs="?")

    p = sub.add_parser("resolve", parents=[common], help="metrics applicable to a requirement")
    p.add_argument("spec")
    p.add_argument("--ext", action="append", default=[], help="extension file; repeatable")
    p.add_argument("--req", required=True)

    cards = sub.add_parser("cards", help="tool card tools").add_subparsers(
        dest="action", parser_class=_Parser, metavar="ACTION")
    cards.required = True
    p = cards.add_parser("lint", parents=[common], help="validate tool cards")
    p.add_argument("files", nargs="+")

    p = sub.add_parser("plan", parents=[common], help="assign tools to metrics")
    p.add_argument("spec")
    p.add_argument("--ext", action="append", default=[])
    p.add_argument("--stdout", action="store_true", help="print plan JSON instead of writing plan.json")

    p = sub.add_parser("run", parents=[common], help="full assessment run")
    p.add_argument("spec")
    p.add_argument("--ext", action="append", default=[])
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--clock", help="fixed RFC 3339 UTC timestamp for reproducible output")

    mp = sub.add_parser("map", help="unmapped metric id proposals").add_subparsers(
        dest="action", parser_class=_Parser, metavar="ACTION")
    mp.required = True
    mp.add_parser("list", parents=[common], help="list proposals")
    p = mp.add_parser("approve", parents=[common], help="approve a proposal")
    p.add_argument("emitted_id")
    p.add_argument("metric_id")
    p.add_argument("--yes", action="store_true", help="do not prompt")

    p = sub.add_parser("verify-chain", parents=[common], help="check evidence log integrity")
    p.add_argument("log", nargs="?")

    p = sub.add_parser("aggregate", parents=[common], help="meso-level signal from reports")
    p.add_argument("inputs", nargs="+", help="report files or directories")
    p.add_argument("--policy", choices=agg.POLICIES, default="strict")
    p.add_argument("--out", help="output file (default <output-dir>/signal.json)")
    return parser


def _config(args: argparse.Namespace) -> EngineConfig:
    keys = ("ontology_path", "catalogue_paths", "timeout_seconds", "max_parallel_tools",
            "gap_threshold", "output_dir", "subject")
    return load_config(args.config, overrides={k: getattr(args, k, None) for k in keys})


def _print_findings(findings, stream=None) -> None:
    for f in findings:
        print(str(f), file=stream or sys.stdout)


def cmd_dsl(args: argparse.Namespace, cfg: EngineConfig) -> int:
    if args.action == "check":
        for f in args.files:
            parse_any(Path(f).read_bytes())
            print(f"ok {f}")
        return 0
    if args.action == "fmt":
        tree = parse_any(Path(args.file).read_bytes())
        text = format_spec(tree) if isinstance(tree, SandboxSpec) else format_extensions(tree)
        if args.write:
            Path(args.file).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return 0
    if args.action == "hash":
        tree = parse_any(Path(args.file).read_bytes())
        trees = [tree] if isinstance(tree, SandboxSpec) else tree
        for t in trees:
            print(spec_hash(t))
        return 0
    core = parse_spec(Path(args.core).read_bytes())
    exts = [e for p in args.extensions for e in parse_extensions(Path(p).read_bytes())]
    eff = merge(core, exts)
    if args.hash:
        print(spec_hash(eff))
    else:
        sys.stdout.write(format_spec(eff))
    return 0


def cmd_onto(args: argparse.Namespace, cfg: EngineConfig) -> int:
    if args.file:
        cfg = replace(cfg, ontology_path=Path(args.file))
    ont = load_ontology(cfg, check=False)
    findings = check_consistency(ont)
    _print_findings(findings)
    if not findings:
        print(f"ok: {len(ont)} triples")
    return 0 if not findings else 1


def cmd_resolve(args: argparse.Namespace, cfg: EngineConfig) -> int:
    eff = load_effective(args.spec, args.ext)
    ont = load_ontology(cfg)
    warnings: list = []
    for md in sorted(resolve_metrics(ont, args.req, eff.system_type, warnings)):
        print(f"{md.metric_id} {md.definition_id}")
    _print_findings(warnings, sys.stderr)
    return 0


def cmd_cards(args: argparse.Namespace, cfg: EngineConfig) -> int:
    ont = load_ontology(cfg)
    bad = 0
    for f in args.files:
        card, findings = lint_card(Path(f).read_bytes(), ont)
        if card is None:
            bad += 1
            print(f"{f}: {len(findings)} finding(s)")
            _print_findings(findings)
        else:
            print(f"ok {f} ({card.tool_id} {card.version})")
    return 1 if bad else 0


def cmd_plan(args: argparse.Namespace, cfg: EngineConfig) -> int:
    eff = load_effective(args.spec, args.ext)
    ont = load_ontology(cfg)
    cat = load_catalogue(cfg.catalogue_paths, ont)
    _print_findings(cat.findings, sys.stderr)
    plan = plan_assessment(eff, ont, cat)
    data = canonical_serialize(plan.to_dict())
    if args.stdout:
        sys.stdout.write(data.decode("utf-8") + "\n")
    else:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        (cfg.output_dir / "plan.json").write_bytes(data)
        print(f"{len(plan.assignments)} assignment(s), {len(plan.gaps)} gap(s) -> "
              f"{cfg.output_dir / 'plan.json'}")
    return 0


def cmd_run(args: argparse.Namespace, cfg: EngineConfig) -> int:
    result = run_pipeline(args.spec, args.ext, args.scenario, args.mode, cfg, clock=args.clock)
    if result.error:
        print(f"error: {result.error['message']}", file=sys.stderr)
        return result.exit_code
    s = result.report["summary"]
    print(f"pass={s['pass']} fail={s['fail']} unassessed={s['unassessed']} "
          f"gaps={len(result.report['gaps'])} report={result.output_dir / 'report.json'}")
    if args.mode == "development" and s["fail"]:
        print(f"info: {s['fail']} failing requirement(s) recorded as preliminary learning signals")
    return result.exit_code


def cmd_map(args: argparse.Namespace, cfg: EngineConfig) -> int:
    path = cfg.output_dir / "mappings.json"
    proposals = load_mappings(path)
    if args.action == "list":
        log_path = cfg.output_dir / "evidence.ndjson"
        if cfg.ontology_path is not None and log_path.exists():
            ont = load_ontology(cfg)
            unmapped = [r for r in EvidenceLog(log_path) if r.status == "unmapped"]
            new, findings = propose_mappings(unmapped, ont)
            proposals = merge_proposals(proposals, new)
            _print_findings(findings, sys.stderr)
            if proposals:
                save_mappings(path, proposals)
        for p in proposals:
            mark = "approved" if p.approved else "pending"
            print(f"{p.emitted_id!r} -> {p.proposed_metric_id} [{p.basis}] {mark}")
        return 0
    ont = load_ontology(cfg)
    if not args.yes and sys.stdin.isatty():
        answer = input(f"map {args.emitted_id!r} to {args.metric_id}? [y/N] ")
        if answer.strip().lower() not in ("y", "yes"):
            print("not approved")
            return 1
    try:
        proposals = approve_mapping(proposals, args.emitted_id, args.metric_id, ont)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    save_mappings(path, proposals)
    print(f"approved {args.emitted_id!r} -> {args.metric_id}")
    return 0


def cmd_verify_chain(args: argparse.Namespace, cfg: EngineConfig) -> int:
    path = Path(args.log) if args.log else cfg.output_dir / "evidence.ndjson"
    data = path.read_bytes()
    broken = verify_chain(data)
    if broken is None:
        print(f"ok: {len(data.splitlines())} record(s)")
        return 0
    print(f"broken at index {broken}")
    return 1


def cmd_aggregate(args: argparse.Namespace, cfg: EngineConfig) -> int:
    reports = agg.load_reports(args.inputs)
    signal = agg.aggregate_reports(reports, args.policy, cfg.gap_threshold)
    out = Path(args.out) if args.out else cfg.output_dir / "signal.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(canonical_serialize(signal))
    print(f"{signal['report_count']} report(s), {len(signal['groups'])} group(s), "
          f"{len(signal['coverage_gaps'])} coverage gap(s) -> {out}")
    return 0


COMMANDS = {
    "dsl": cmd_dsl,
    "onto": cmd_onto,
    "resolve": cmd_resolve,
    "cards": cmd_cards,
    "plan": cmd_plan,
    "run": cmd_run,
    "map": cmd_map,
    "verify-chain": cmd_verify_chain,
    "aggregate": cmd_aggregate,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except AitsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 16


def entry() -> Any:
    sys.exit(main())


if __name__ == "__main__":
    entry()
