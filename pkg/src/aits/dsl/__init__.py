"""Layered sandbox-specification language: parse, format, hash, merge."""

from aits.dsl.format import format_extensions, format_spec, spec_hash
from aits.dsl.merge import extend, merge
from aits.dsl.model import (
    EffectiveSpec,
    MetricBinding,
    Requirement,
    SandboxSpec,
    SpecExtension,
)
from aits.dsl.parser import parse_any, parse_extension, parse_extensions, parse_spec

__all__ = [
    "EffectiveSpec",
    "MetricBinding",
    "Requirement",
    "SandboxSpec",
    "SpecExtension",
    "extend",
    "format_extensions",
    "format_spec",
    "merge",
    "parse_any",
    "parse_extension",
    "parse_extensions",
    "parse_spec",
    "spec_hash",
]
