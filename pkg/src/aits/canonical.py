"""Canonical JSON bytes for hashing and on-disk artifacts.

Keys are sorted, separators carry no whitespace, floats use Python's
shortest round-trip repr and non-finite numbers are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

ZERO_HASH = "0" * 64


def _plain(obj: Any) -> Any:
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"object of type {type(obj).__name__} is not serializable")


def canonical_dumps(obj: Any) -> str:
    try:
        return json.dumps(
            obj,
            sort_keys=True,
            separators=(",", ":"),
            ensure_ascii=False,
            allow_nan=False,
            default=_plain,
        )
    except ValueError as exc:
        raise ValueError(f"cannot canonicalize: {exc}") from None


def canonical_serialize(obj: Any) -> bytes:
    """UTF-8 canonical JSON of a report, record or any JSON-shaped value."""
    return canonical_dumps(obj).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_hash(obj: Any) -> str:
    return sha256_hex(canonical_serialize(obj))


def decode(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data, parse_constant=_reject_constant, parse_float=_finite_float)


def _reject_constant(name: str) -> Any:
    raise ValueError(f"non-finite number {name} is not allowed")


def _finite_float(text: str) -> float:
    value = float(text)
    if math.isinf(value):
        raise ValueError(f"number {text} overflows to infinity")
    return value
