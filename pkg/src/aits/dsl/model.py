"""Immutable trees for sandbox specs, extensions and merged effective specs."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Literal

Comparator = Literal["LE", "GE"]
RISK_CLASSES = ("high", "limited", "minimal")

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
# segments after the first may start with a digit (R.1, SECTOR.EMP.1)
QID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*(?:\.[A-Za-z0-9_][A-Za-z0-9_-]*)*")
VERSION_RE = re.compile(r"(0|[1-9][0-9]*)\.(0|[1-9][0-9]*)(\.(0|[1-9][0-9]*))?")
NUMBER_RE = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")


def is_qid(text: str) -> bool:
    return QID_RE.fullmatch(text) is not None


def is_version(text: str) -> bool:
    return VERSION_RE.fullmatch(text) is not None


@dataclass(frozen=True)
class MetricBinding:
    """A threshold on one metric. The decimal text is kept verbatim for hashing."""

    metric_id: str
    comparator: Comparator
    threshold_text: str

    @property
    def threshold(self) -> float:
        return float(self.threshold_text)

    def is_satisfied_by(self, observed: float) -> bool:
        # inclusive at equality
        if self.comparator == "LE":
            return observed <= self.threshold
        return observed >= self.threshold

    def is_tighter_or_equal(self, other: MetricBinding) -> bool:
        """True when this threshold is at least as strict as ``other``'s."""
        if self.comparator == "LE":
            return self.threshold <= other.threshold
        return self.threshold >= other.threshold


def tightest(a: MetricBinding, b: MetricBinding) -> MetricBinding:
    """Pick the stricter of two same-comparator bindings, independent of argument order."""
    if a.threshold == b.threshold:
        return min(a, b, key=lambda x: x.threshold_text)
    return a if a.is_tighter_or_equal(b) else b


@dataclass(frozen=True)
class Requirement:
    id: str
    label: str | None = None
    bindings: tuple[MetricBinding, ...] = ()
    unbound: bool = False

    def binding(self, metric_id: str) -> MetricBinding | None:
        for b in self.bindings:
            if b.metric_id == metric_id:
                return b
        return None


@dataclass(frozen=True)
class SandboxSpec:
    name: str
    version: str
    system_type: str
    risk_class: str
    requirements: tuple[Requirement, ...] = ()

    def requirement(self, req_id: str) -> Requirement | None:
        for r in self.requirements:
            if r.id == req_id:
                return r
        return None


@dataclass(frozen=True)
class SpecExtension:
    name: str
    extends_name: str
    extends_version: str
    additions: tuple[Requirement, ...] = ()
    refinements: tuple[Requirement, ...] = ()


@dataclass(frozen=True)
class EffectiveSpec:
    """Core plus applied extensions.

    ``origins`` maps each requirement id to ``"core"`` or the name of the
    extension that added it. ``baselines`` holds, per (requirement, metric),
    the threshold no refinement may loosen; bindings introduced by a
    refinement have no baseline.
    """

    core: SandboxSpec
    applied_extensions: tuple[str, ...]
    requirements: tuple[Requirement, ...]
    origins: dict[str, str] = field(default_factory=dict, compare=False, hash=False)
    baselines: dict[tuple[str, str], MetricBinding] = field(
        default_factory=dict, compare=False, hash=False)

    @property
    def system_type(self) -> str:
        return self.core.system_type

    def requirement(self, req_id: str) -> Requirement | None:
        for r in self.requirements:
            if r.id == req_id:
                return r
        return None

    def flatten(self) -> SandboxSpec:
        """The merged table as a plain sandbox spec with the core's header."""
        c = self.core
        return SandboxSpec(c.name, c.version, c.system_type, c.risk_class, self.requirements)


def check_threshold(text: str) -> None:
    if NUMBER_RE.fullmatch(text) is None:
        raise ValueError(f"not a decimal literal: {text!r}")
    if not math.isfinite(float(text)):
        raise ValueError(f"threshold {text} is not finite")
