"""Replay recorded completions from a JSON-lines fixture.

One line per recorded call::

    {"model": "gpt-5", "context_id": "male", "trial": 3, "kind": "trial",
     "text": "5", "input_tokens": 812, "output_tokens": 1, "attempt": 1,
     "tokens_estimated": false}

A cell with a re-ask has two lines in call order. ``"error": "<reason>"``
replays a transport failure after ``attempt`` attempts.
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict, deque
from pathlib import Path
from typing import Any, Iterable

from ..contexts import PromptBundle
from .base import Backend, CompletionParams, CompletionResult, FixtureError, TransportError
from .gate import RateGate

TRIAL = "trial"
FOLLOWUP = "followup"

_FIELD_ORDER = (
    "model",
    "context_id",
    "trial",
    "kind",
    "text",
    "error",
    "input_tokens",
    "output_tokens",
    "tokens_estimated",
    "attempt",
    "latency_s",
)


def fixture_line(entry: dict[str, Any]) -> str:
    ordered = {k: entry[k] for k in _FIELD_ORDER if k in entry}
    return json.dumps(ordered, ensure_ascii=False)


def write_fixture(entries: Iterable[dict[str, Any]], path: str | Path) -> None:
    """Write fixture lines sorted by (model, context, trial, kind); call order is kept within a key."""
    indexed = list(enumerate(entries))
    indexed.sort(key=lambda ie: (ie[1]["model"], ie[1]["context_id"], ie[1]["trial"], ie[1].get("kind", TRIAL), ie[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for _, e in indexed:
            fh.write(fixture_line(e) + "\n")


def read_fixture(path: str | Path) -> list[dict[str, Any]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FixtureError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
    return out


class ReplayBackend(Backend):
    kind = "replay"

    def __init__(self, model: str, fixture: str | Path, gate: RateGate | None = None):
        super().__init__(model, gate)
        self.fixture = Path(fixture)
        self._lock = threading.Lock()
        self._queues: dict[tuple[str, int, str], deque[dict[str, Any]]] = defaultdict(deque)
        for e in read_fixture(self.fixture):
            if e.get("model") != model:
                continue
            self._queues[(e["context_id"], int(e["trial"]), e.get("kind", TRIAL))].append(e)

    def validate(self) -> None:
        if not self._queues:
            raise FixtureError(f"fixture {self.fixture} has no records for model {self.model!r}")

    def complete(
        self,
        bundle: PromptBundle,
        params: CompletionParams,
        *,
        trial: int | None = None,
        call: int = 0,
    ) -> CompletionResult:
        kind = FOLLOWUP if bundle.is_followup else TRIAL
        key = (bundle.context_id, int(trial if trial is not None else -1), kind)
        with self._lock:
            queue = self._queues.get(key)
            if not queue:
                raise FixtureError(f"no recorded {kind} result for {self.model!r} {key[:2]} in {self.fixture}")
            entry = queue.popleft()
        with self.gate.slot():
            pass
        if entry.get("error"):
            raise TransportError(f"replayed failure: {entry['error']}", attempts=int(entry.get("attempt", 1)), reason=entry["error"])
        return CompletionResult(
            text=entry.get("text", ""),
            input_tokens=int(entry.get("input_tokens", 0)),
            output_tokens=int(entry.get("output_tokens", 0)),
            latency_s=float(entry.get("latency_s", 0.0)),
            attempt=int(entry.get("attempt", 1)),
            tokens_estimated=bool(entry.get("tokens_estimated", False)),
        )

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "model": self.model, "fixture": str(self.fixture.resolve()), "rate_limit": self.gate.to_dict()}
