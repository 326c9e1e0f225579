"""Append-only, hash-chained evidence log (`evidence.ndjson`)."""

from __future__ import annotations

import math
import os
import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from aits.canonical import ZERO_HASH, canonical_serialize, decode, sha256_hex
from aits.errors import EvidenceError

STATUSES = ("measured", "missing", "unmapped", "error")
_RFC3339_UTC = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?Z")
_HEX64 = re.compile(r"[0-9a-f]{64}")


@dataclass(frozen=True)
class Instance:
    instance_id: str
    value: float


@dataclass(frozen=True)
class EvidenceRecord:
    seq: int
    run_id: str
    spec_hash: str
    requirement_id: str | None
    metric_id: str
    definition_id: str | None
    tool_id: str
    tool_version: str
    status: str
    timestamp: str
    value: float | None = None
    instances: tuple[Instance, ...] | None = None
    event_index: int | None = None
    prev_hash: str = ZERO_HASH
    record_hash: str | None = None

    def to_dict(self, *, with_hash: bool = True) -> dict[str, Any]:
        d: dict[str, Any] = {
            "seq": self.seq,
            "prev_hash": self.prev_hash,
            "run_id": self.run_id,
            "spec_hash": self.spec_hash,
            "requirement_id": self.requirement_id,
            "metric_id": self.metric_id,
            "definition_id": self.definition_id,
            "tool_id": self.tool_id,
            "tool_version": self.tool_version,
            "status": self.status,
            "value": self.value,
            "instances": None if self.instances is None else [
                {"instance_id": i.instance_id, "value": i.value} for i in self.instances],
            "event_index": self.event_index,
            "timestamp": self.timestamp,
        }
        if with_hash:
            d["record_hash"] = self.record_hash
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EvidenceRecord:
        inst = d.get("instances")
        return cls(
            seq=d["seq"],
            run_id=d["run_id"],
            spec_hash=d["spec_hash"],
            requirement_id=d["requirement_id"],
            metric_id=d["metric_id"],
            definition_id=d["definition_id"],
            tool_id=d["tool_id"],
            tool_version=d["tool_version"],
            status=d["status"],
            timestamp=d["timestamp"],
            value=d.get("value"),
            instances=None if inst is None else tuple(Instance(i["instance_id"], i["value"]) for i in inst),
            event_index=d.get("event_index"),
            prev_hash=d.get("prev_hash", ZERO_HASH),
            record_hash=d.get("record_hash"),
        )

    def compute_hash(self) -> str:
        return sha256_hex(canonical_serialize(self.to_dict(with_hash=False)))

    def validate(self) -> None:
        problems = []
        if not isinstance(self.seq, int) or isinstance(self.seq, bool) or self.seq < 0:
            problems.append("seq must be an integer >= 0")
        if self.status not in STATUSES:
            problems.append(f"unknown status {self.status!r}")
        has_value = self.value is not None
        if has_value and (isinstance(self.value, bool) or not isinstance(self.value, (int, float))
                          or not math.isfinite(self.value)):
            problems.append("value must be a finite number")
        if self.status in ("measured", "unmapped") and not has_value:
            problems.append(f"{self.status} record requires a value")
        if self.status in ("missing", "error") and has_value:
            problems.append(f"{self.status} record must not carry a value")
        if self.status in ("missing", "error") and self.instances is not None:
            problems.append(f"{self.status} record must not carry instances")
        if not _RFC3339_UTC.fullmatch(self.timestamp or ""):
            problems.append(f"timestamp {self.timestamp!r} is not RFC 3339 UTC")
        if not _HEX64.fullmatch(self.spec_hash or ""):
            problems.append("spec_hash must be 64 lowercase hex characters")
        for inst in self.instances or ():
            v = inst.value
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                problems.append(f"instance {inst.instance_id!r} value must be a finite number")
        if problems:
            raise EvidenceError("invalid evidence record: " + "; ".join(problems))


class EvidenceLog:
    """Single-writer append-only log; in memory, or backed by an ndjson file.

    Opening an existing file verifies its chain first.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._records: list[EvidenceRecord] = []
        if self.path is not None and self.path.exists():
            data = self.path.read_bytes()
            broken = verify_chain(data)
            if broken is not None:
                raise EvidenceError(f"{self.path}: chain broken at record {broken}")
            self._records = [EvidenceRecord.from_dict(decode(line)) for line in _lines(data)]

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[EvidenceRecord]:
        return iter(self._records)

    def __getitem__(self, i: int) -> EvidenceRecord:
        return self._records[i]

    @property
    def tail_hash(self) -> str:
        return self._records[-1].record_hash if self._records else ZERO_HASH

    def append(self, record: EvidenceRecord) -> EvidenceRecord:
        """Seal ``record`` onto the chain and persist it. ``record.seq`` must equal ``len(self)``."""
        if record.seq != len(self._records):
            raise EvidenceError(f"seq mismatch: expected {len(self._records)}, got {record.seq}")
        record.validate()
        sealed = replace(record, prev_hash=self.tail_hash, record_hash=None)
        sealed = replace(sealed, record_hash=sealed.compute_hash())
        if self.path is not None:
            with open(self.path, "ab") as fh:
                fh.write(canonical_serialize(sealed.to_dict()) + b"\n")
                fh.flush()
                os.fsync(fh.fileno())
        self._records.append(sealed)
        return sealed

    def extend(self, records: Iterable[EvidenceRecord]) -> list[EvidenceRecord]:
        """Append records, renumbering ``seq`` to continue the chain."""
        return [self.append(replace(r, seq=len(self._records))) for r in records]


def append_record(log: EvidenceLog, record: EvidenceRecord) -> EvidenceLog:
    log.append(record)
    return log


def _lines(data: bytes) -> list[bytes]:
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return lines


def verify_chain(log: bytes | str | Path | EvidenceLog) -> int | None:
    """Return ``None`` if the log is intact, else the smallest broken index.

    A line is intact when it decodes, is byte-identical to its canonical
    re-serialization, its stored hash matches, and it links to its
    predecessor with the expected ``seq``.
    """
    if isinstance(log, EvidenceLog):
        data = b"".join(canonical_serialize(r.to_dict()) + b"\n" for r in log)
    elif isinstance(log, Path):
        data = log.read_bytes()
    elif isinstance(log, str):
        data = log.encode("utf-8")
    else:
        data = log

    prev = ZERO_HASH
    for i, line in enumerate(_lines(data)):
        try:
            obj = decode(line)
            if not isinstance(obj, dict) or canonical_serialize(obj) != line:
                return i
            record = EvidenceRecord.from_dict(obj)
            if record.to_dict() != obj:
                return i
        except (ValueError, KeyError, TypeError, AttributeError):
            return i
        if record.seq != i or record.prev_hash != prev or record.record_hash != record.compute_hash():
            return i
        prev = record.record_hash
    return None
