"""Canonical pretty-printer and content hash for DSL trees."""

from __future__ import annotations

import hashlib

from aits.dsl.model import EffectiveSpec, Requirement, SandboxSpec, SpecExtension

INDENT = "  "
_OPS = {"LE": "<=", "GE": ">="}


def quote(text: str) -> str:
    escaped = (text.replace("\\", "\\\\").replace('"', '\\"')
               .replace("\n", "\\n").replace("\t", "\\t"))
    return f'"{escaped}"'


def _requirement_lines(req: Requirement, depth: int, prefix: str = "") -> list[str]:
    pad = INDENT * depth
    head = f"{pad}{prefix}requirement {req.id}"
    if req.label is not None:
        head += f" {quote(req.label)}"
    if req.unbound:
        return [head + " unbound"]
    lines = [head + " {"]
    for b in req.bindings:
        lines.append(f"{pad}{INDENT}metric {b.metric_id} {_OPS[b.comparator]} {b.threshold_text}")
    lines.append(pad + "}")
    return lines


def _spec_lines(spec: SandboxSpec) -> list[str]:
    lines = [
        f"sandbox {quote(spec.name)} version {quote(spec.version)} {{",
        f"{INDENT}system_type {spec.system_type}",
        f"{INDENT}risk_class {spec.risk_class}",
    ]
    for req in spec.requirements:
        lines.extend(_requirement_lines(req, 1))
    lines.append("}")
    return lines


def _extension_lines(ext: SpecExtension) -> list[str]:
    lines = [
        f"extension {quote(ext.name)} extends {quote(ext.extends_name)} "
        f"version {quote(ext.extends_version)} {{"
    ]
    for req in ext.additions:
        lines.extend(_requirement_lines(req, 1, "add "))
    for req in ext.refinements:
        lines.extend(_requirement_lines(req, 1, "refine "))
    lines.append("}")
    return lines


def format_spec(tree: SandboxSpec | SpecExtension | EffectiveSpec) -> str:
    """Render ``tree`` as canonical source text ending in a newline.

    An effective spec renders as its flattened sandbox preceded by a header
    line naming the applied extensions, so it still parses as a spec.
    """
    if isinstance(tree, EffectiveSpec):
        applied = ", ".join(tree.applied_extensions) if tree.applied_extensions else "-"
        lines = [f"# applied extensions: {applied}"] + _spec_lines(tree.flatten())
    elif isinstance(tree, SandboxSpec):
        lines = _spec_lines(tree)
    elif isinstance(tree, SpecExtension):
        lines = _extension_lines(tree)
    else:
        raise TypeError(f"cannot format {type(tree).__name__}")
    return "\n".join(lines) + "\n"


def format_extensions(exts: list[SpecExtension]) -> str:
    return "".join(format_spec(e) for e in exts)


def spec_hash(tree: SandboxSpec | SpecExtension | EffectiveSpec) -> str:
    return hashlib.sha256(format_spec(tree).encode("utf-8")).hexdigest()
