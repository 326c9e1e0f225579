"""Piggyback merge of sector extensions onto a core spec.

Extensions may add requirements, tighten existing thresholds, or attach
new bindings to existing requirements. They never remove or loosen.
A label given on a refinement is ignored; the original label stands.
"""

from __future__ import annotations

from collections.abc import Iterable

from aits.dsl.model import (
    EffectiveSpec,
    MetricBinding,
    Requirement,
    SandboxSpec,
    SpecExtension,
    tightest,
)
from aits.errors import MergeError


def identity(core: SandboxSpec) -> EffectiveSpec:
    baselines = {(r.id, b.metric_id): b for r in core.requirements for b in r.bindings}
    return EffectiveSpec(
        core=core,
        applied_extensions=(),
        requirements=core.requirements,
        origins={r.id: "core" for r in core.requirements},
        baselines=baselines,
    )


def _refine(current: Requirement, refinement: Requirement,
            baselines: dict[tuple[str, str], MetricBinding], ext_name: str) -> Requirement:
    bindings = list(current.bindings)
    for new in refinement.bindings:
        key = (current.id, new.metric_id)
        idx = next((i for i, b in enumerate(bindings) if b.metric_id == new.metric_id), None)
        if idx is None:
            bindings.append(new)
            continue
        existing = bindings[idx]
        if existing.comparator != new.comparator:
            raise MergeError(
                f"{ext_name}: refinement of {current.id}/{new.metric_id} changes comparator "
                f"{existing.comparator} -> {new.comparator}")
        base = baselines.get(key)
        if base is not None and not new.is_tighter_or_equal(base):
            raise MergeError(
                f"{ext_name}: refinement of {current.id}/{new.metric_id} loosens threshold "
                f"{base.threshold_text} -> {new.threshold_text}")
        bindings[idx] = tightest(existing, new)
    return Requirement(current.id, current.label, tuple(bindings), unbound=not bindings)


def extend(eff: EffectiveSpec, ext: SpecExtension) -> EffectiveSpec:
    """Apply one extension to an effective spec."""
    core = eff.core
    if (ext.extends_name, ext.extends_version) != (core.name, core.version):
        raise MergeError(
            f"extension {ext.name} extends {ext.extends_name!r} {ext.extends_version}, "
            f"core is {core.name!r} {core.version}")
    table = {r.id: r for r in eff.requirements}
    order = [r.id for r in eff.requirements]
    origins = dict(eff.origins)
    baselines = dict(eff.baselines)

    for req in ext.refinements:
        if req.id not in table:
            raise MergeError(f"{ext.name}: refine of unknown requirement {req.id}")
        table[req.id] = _refine(table[req.id], req, baselines, ext.name)
    for req in ext.additions:
        if req.id in table:
            owner = origins[req.id]
            raise MergeError(f"{ext.name}: add of {req.id} already provided by {owner}")
        table[req.id] = req
        order.append(req.id)
        origins[req.id] = ext.name
        for b in req.bindings:
            baselines[(req.id, b.metric_id)] = b

    return EffectiveSpec(
        core=core,
        applied_extensions=eff.applied_extensions + (ext.name,),
        requirements=tuple(table[i] for i in order),
        origins=origins,
        baselines=baselines,
    )


def merge(core: SandboxSpec, extensions: Iterable[SpecExtension]) -> EffectiveSpec:
    """Apply ``extensions`` in order; the requirement table keeps core order then additions."""
    eff = identity(core)
    for ext in extensions:
        eff = extend(eff, ext)
    return eff
