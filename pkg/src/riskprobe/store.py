"""Persistence for a run directory.

Layout::

    <run_dir>/manifest.json              config snapshot, status, per-model totals
    <run_dir>/records.jsonl              one TrialRecord per line, append-only
    <run_dir>/followups.jsonl            follow-up transcripts (never used by metrics)
    <run_dir>/records.quarantine.jsonl   corrupt lines moved aside by resume
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from .backends import CompletionResult

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RECORDS = "records.jsonl"
FOLLOWUPS = "followups.jsonl"
QUARANTINE = "records.quarantine.jsonl"

CellKey = tuple[str, str, int]  # (model, context_id, trial)


class AccountingError(RuntimeError):
    """Manifest totals disagree with the persisted records."""


class CorruptRecord(ValueError):
    pass


def utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass
class CallLog:
    text: str
    input_tokens: int = 0
    output_tokens: int = 0
    attempt: int = 1
    tokens_estimated: bool = False
    latency_s: float = 0.0
    error: str | None = None

    @classmethod
    def from_result(cls, res: CompletionResult) -> "CallLog":
        return cls(res.text, res.input_tokens, res.output_tokens, res.attempt, res.tokens_estimated, res.latency_s)


@dataclass
class TrialRecord:
    model: str
    context_id: str
    trial: int
    raw_text: str
    switch: int | None
    unwanted_reason: str | None
    calls: list[CallLog] = field(default_factory=list)
    timestamp: str = ""

    def __post_init__(self) -> None:
        if (self.switch is None) == (self.unwanted_reason is None):
            raise ValueError("exactly one of switch / unwanted_reason must be set")
        if self.switch is not None and not 1 <= self.switch <= 10:
            raise ValueError(f"switch out of range: {self.switch}")

    @property
    def key(self) -> CellKey:
        return (self.model, self.context_id, self.trial)

    @property
    def valid(self) -> bool:
        return self.switch is not None

    @property
    def attempts(self) -> int:
        return sum(c.attempt for c in self.calls)

    @property
    def reasks(self) -> int:
        return max(len(self.calls) - 1, 0)

    @property
    def input_tokens(self) -> int:
        return sum(c.input_tokens for c in self.calls)

    @property
    def output_tokens(self) -> int:
        return sum(c.output_tokens for c in self.calls)

    @property
    def tokens_estimated(self) -> bool:
        return any(c.tokens_estimated for c in self.calls)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrialRecord":
        try:
            return cls(
                model=str(d["model"]),
                context_id=str(d["context_id"]),
                trial=int(d["trial"]),
                raw_text=d["raw_text"],
                switch=d["switch"],
                unwanted_reason=d["unwanted_reason"],
                calls=[CallLog(**c) for c in d.get("calls", [])],
                timestamp=d.get("timestamp", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptRecord(str(exc)) from exc

    def comparable(self) -> dict[str, Any]:
        """Record content with wall-clock fields removed."""
        d = self.to_dict()
        d.pop("timestamp")
        for c in d["calls"]:
            c.pop("latency_s")
        return d


@dataclass
class FollowupRecord:
    model: str
    context_id: str
    trial: int
    answer: str
    question: str
    response: str | None
    calls: list[CallLog] = field(default_factory=list)
    error: str | None = None
    timestamp: str = ""

    @property
    def key(self) -> CellKey:
        return (self.model, self.context_id, self.trial)

    @property
    def attempts(self) -> int:
        return sum(c.attempt for c in self.calls)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FollowupRecord":
        try:
            d = dict(d)
            d["calls"] = [CallLog(**c) for c in d.get("calls", [])]
            return cls(**d)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptRecord(str(exc)) from exc


class JsonlWriter:
    """Thread-safe append-only writer; flushes every line, fsyncs in batches."""

    def __init__(self, path: Path, fsync_every: int = 25):
        self.path = Path(path)
        self.fsync_every = max(1, fsync_every)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")
        self._pending = 0

    def write(self, line: str) -> None:
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()
            self._pending += 1
            if self._pending >= self.fsync_every:
                os.fsync(self._fh.fileno())
                self._pending = 0

    def sync(self) -> None:
        with self._lock:
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._pending = 0

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.flush()
                os.fsync(self._fh.fileno())
                self._fh.close()


def _read_jsonl(path: Path, factory) -> tuple[list, list[str]]:
    good, bad = [], []
    if not path.exists():
        return good, bad
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            if not line.strip():
                continue
            if not line.endswith("\n"):
                # torn final write
                bad.append(line)
                continue
            try:
                good.append(factory(json.loads(line)))
            except (json.JSONDecodeError, CorruptRecord):
                bad.append(line.rstrip("\n"))
    return good, bad


def read_records(run_dir: Path, strict: bool = False) -> list[TrialRecord]:
    """Load trial records; corrupt lines are skipped (or raise when ``strict``).

    Duplicate keys keep the first record.
    """
    records, bad = _read_jsonl(Path(run_dir) / RECORDS, TrialRecord.from_dict)
    if bad:
        if strict:
            raise CorruptRecord(f"{len(bad)} corrupt line(s) in {Path(run_dir) / RECORDS}")
        log.warning("skipping %d corrupt record line(s) in %s", len(bad), run_dir)
    seen: set[CellKey] = set()
    out = []
    for r in records:
        if r.key in seen:
            continue
        seen.add(r.key)
        out.append(r)
    return out


def read_followups(run_dir: Path) -> list[FollowupRecord]:
    recs, bad = _read_jsonl(Path(run_dir) / FOLLOWUPS, FollowupRecord.from_dict)
    if bad:
        log.warning("skipping %d corrupt follow-up line(s) in %s", len(bad), run_dir)
    return recs


def repair_records(run_dir: Path) -> tuple[list[TrialRecord], int]:
    """Move corrupt and duplicate lines to the quarantine file; rewrite the rest.

    Returns the surviving records and the number of lines quarantined.
    """
    run_dir = Path(run_dir)
    path = run_dir / RECORDS
    records, bad = _read_jsonl(path, TrialRecord.from_dict)
    seen: set[CellKey] = set()
    kept: list[TrialRecord] = []
    for r in records:
        if r.key in seen:
            bad.append(r.to_json())
            continue
        seen.add(r.key)
        kept.append(r)
    if bad:
        with open(run_dir / QUARANTINE, "a", encoding="utf-8", newline="\n") as q:
            for line in bad:
                q.write(line.rstrip("\n") + "\n")
        tmp = path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            for r in kept:
                fh.write(r.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
        log.warning("quarantined %d record line(s) from %s", len(bad), path)
    return kept, len(bad)


# ---------------------------------------------------------------------------
# accounting

_TOTAL_FIELDS = (
    "records",
    "valid",
    "unwanted",
    "reasks",
    "input_tokens",
    "output_tokens",
    "api_requests",
    "tokens_estimated_records",
    "followups",
    "followup_requests",
    "followup_input_tokens",
    "followup_output_tokens",
)


def compute_totals(
    records: Iterable[TrialRecord], followups: Iterable[FollowupRecord] = (), models: Iterable[str] = ()
) -> dict[str, dict[str, int]]:
    totals: dict[str, dict[str, int]] = {m: dict.fromkeys(_TOTAL_FIELDS, 0) for m in models}
    for r in records:
        t = totals.setdefault(r.model, dict.fromkeys(_TOTAL_FIELDS, 0))
        t["records"] += 1
        t["valid"] += r.valid
        t["unwanted"] += not r.valid
        t["reasks"] += r.reasks
        t["input_tokens"] += r.input_tokens
        t["output_tokens"] += r.output_tokens
        t["api_requests"] += r.attempts
        t["tokens_estimated_records"] += r.tokens_estimated
    for f in followups:
        t = totals.setdefault(f.model, dict.fromkeys(_TOTAL_FIELDS, 0))
        t["followups"] += 1
        t["followup_requests"] += f.attempts
        t["followup_input_tokens"] += sum(c.input_tokens for c in f.calls)
        t["followup_output_tokens"] += sum(c.output_tokens for c in f.calls)
    return {m: totals[m] for m in sorted(totals)}


def read_manifest(run_dir: Path) -> dict[str, Any]:
    with open(Path(run_dir) / MANIFEST, encoding="utf-8") as fh:
        return json.load(fh)


def write_manifest(run_dir: Path, manifest: dict[str, Any]) -> None:
    path = Path(run_dir) / MANIFEST
    tmp = path.with_suffix(".json.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def reconcile(run_dir: Path, manifest: dict[str, Any] | None = None) -> dict[str, dict[str, int]]:
    """Recompute totals from disk and compare with the manifest; raise on mismatch."""
    manifest = manifest if manifest is not None else read_manifest(run_dir)
    models = [b["model"] for b in manifest["config"]["backends"]]
    actual = compute_totals(read_records(run_dir), read_followups(run_dir), models)
    if actual != manifest.get("totals"):
        raise AccountingError(f"manifest totals {manifest.get('totals')} != record sums {actual}")
    return actual
