"""Experiment orchestration: models x contexts x trials with resumable persistence."""

from __future__ import annotations

import logging
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .backends import Backend, BackendError, GateClosed, SyntheticBackend, TransportError
from .config import ExperimentConfig
from .contexts import PromptBundle, render_followup, render_prompt
from .parsing import Reason, parse_response
from .store import (
    FOLLOWUPS,
    MANIFEST,
    RECORDS,
    CallLog,
    CellKey,
    FollowupRecord,
    JsonlWriter,
    TrialRecord,
    compute_totals,
    read_followups,
    read_manifest,
    reconcile,
    repair_records,
    utcnow,
    write_manifest,
)

log = logging.getLogger(__name__)

EXIT_COMPLETE = 0
EXIT_ABORTED = 1
EXIT_COMPLETE_WITH_UNWANTED = 2


class RunDirExists(RuntimeError):
    pass


def all_cells(models: Sequence[str], contexts: Sequence[str], trials: int) -> list[CellKey]:
    """Every cell, ordered so that a partial run covers contexts evenly."""
    return [(m, c, t) for t in range(1, trials + 1) for c in contexts for m in models]


@dataclass
class RunOutcome:
    run_dir: Path
    manifest: dict
    records: list[TrialRecord]
    calls_made: int = 0
    error: str | None = None
    followups: list[FollowupRecord] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.manifest["status"] == "complete"

    @property
    def exit_code(self) -> int:
        if not self.complete:
            return EXIT_ABORTED
        if any(t["unwanted"] for t in self.manifest["totals"].values()):
            return EXIT_COMPLETE_WITH_UNWANTED
        return EXIT_COMPLETE


def resume(run_dir: str | Path) -> tuple[ExperimentConfig, set[CellKey]]:
    """Rebuild the config of an existing run and the set of finished cells.

    Corrupt record lines are quarantined so their cells run again.
    """
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    cfg = ExperimentConfig.from_snapshot(manifest["config"], output_dir=run_dir)
    records, _ = repair_records(run_dir)
    return cfg, {r.key for r in records}


def remaining_cells(cfg: ExperimentConfig, completed: set[CellKey]) -> list[CellKey]:
    models = [b.model if isinstance(b, Backend) else b["model"] for b in cfg.backends]
    return [k for k in all_cells(models, cfg.contexts, cfg.trials_per_context) if k not in completed]


def run_cell(
    backend: Backend,
    bundle: PromptBundle,
    cfg: ExperimentConfig,
    trial: int,
) -> TrialRecord:
    """Ask once; on an unwanted answer ask again in a fresh conversation."""
    calls: list[CallLog] = []
    max_calls = 2 if cfg.reask_unwanted else 1
    text = ""
    reason: Reason | None = None
    for call in range(max_calls):
        try:
            res = backend.complete(bundle, cfg.params, trial=trial, call=call)
        except TransportError as exc:
            calls.append(CallLog("", attempt=exc.attempts, error=exc.reason))
            text, reason = "", Reason.TRANSPORT
            break
        calls.append(CallLog.from_result(res))
        text = res.text
        parsed = parse_response(text, cfg.lenient_parsing)
        if isinstance(parsed, int):
            return TrialRecord(backend.model, bundle.context_id, trial, text, parsed, None, calls, utcnow())
        reason = parsed.reason
    return TrialRecord(backend.model, bundle.context_id, trial, text, None, reason.value, calls, utcnow())


def _run_followup(backend: Backend, prior: PromptBundle, rec: TrialRecord, cfg: ExperimentConfig) -> FollowupRecord:
    bundle = render_followup(prior, rec.raw_text, cfg.followup_question)
    try:
        res = backend.complete(bundle, cfg.params, trial=rec.trial)
    except TransportError as exc:
        return FollowupRecord(
            rec.model, rec.context_id, rec.trial, rec.raw_text, cfg.followup_question, None,
            [CallLog("", attempt=exc.attempts, error=exc.reason)], exc.reason, utcnow(),
        )
    return FollowupRecord(
        rec.model, rec.context_id, rec.trial, rec.raw_text, cfg.followup_question, res.text,
        [CallLog.from_result(res)], None, utcnow(),
    )


def _seeds(cfg: ExperimentConfig, backends: Sequence[Backend]) -> dict:
    seeds: dict = {"params_seed": cfg.params.seed}
    for b in backends:
        if isinstance(b, SyntheticBackend):
            seeds[b.model] = b.spec.rng_seed
    return seeds


def run_experiment(
    config: ExperimentConfig,
    *,
    resume_run: bool = False,
    cancel: threading.Event | None = None,
    on_record: Callable[[TrialRecord], None] | None = None,
) -> RunOutcome:
    """Execute every missing cell of ``config`` and persist the results.

    With ``resume_run`` the output directory may already hold a run, whose
    finished cells are skipped. Setting ``cancel`` stops the run after the
    cells already in flight; the run directory can then be resumed.
    """
    cancel = cancel or threading.Event()
    specs = {c.id: c for c in config.context_specs()}
    backends = config.build_backends()
    for b in backends:
        b.validate()
    by_model = {b.model: b for b in backends}
    bundles = {cid: render_prompt(spec) for cid, spec in specs.items()}

    run_dir = config.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    if (run_dir / MANIFEST).exists():
        if not resume_run:
            raise RunDirExists(f"{run_dir} already contains a run; resume it instead")
        previous = read_manifest(run_dir)
        started_at = previous.get("started_at", utcnow())
    else:
        started_at = utcnow()

    existing, _ = repair_records(run_dir)
    completed = {r.key for r in existing}
    todo = [k for k in all_cells(list(by_model), config.contexts, config.trials_per_context) if k not in completed]

    records_lock = threading.Lock()
    records: list[TrialRecord] = list(existing)
    followups = read_followups(run_dir)
    models = list(by_model)

    manifest = {
        "harness_version": __version__,
        "status": "running",
        "started_at": started_at,
        "ended_at": None,
        "config": config.snapshot(backends),
        "rng_seeds": _seeds(config, backends),
        "expected_cells": len(models) * len(specs) * config.trials_per_context,
        "totals": compute_totals(records, followups, models),
    }
    write_manifest(run_dir, manifest)

    calls_made = 0
    error: str | None = None
    writer = JsonlWriter(run_dir / RECORDS, config.fsync_every)

    def work(key: CellKey) -> None:
        nonlocal calls_made
        if cancel.is_set():
            return
        model, cid, trial = key
        rec = run_cell(by_model[model], bundles[cid], config, trial)
        writer.write(rec.to_json())
        with records_lock:
            records.append(rec)
            calls_made += len(rec.calls)
        if on_record is not None:
            on_record(rec)

    pool = ThreadPoolExecutor(max_workers=config.workers, thread_name_prefix="cell")
    try:
        futures = [pool.submit(work, k) for k in todo]
        try:
            done, _ = wait(futures, return_when=FIRST_EXCEPTION)
        except KeyboardInterrupt:
            cancel.set()
            error = "interrupted"
            done = set()
        for f in done:
            exc = f.exception()
            if exc is not None and error is None:
                if isinstance(exc, GateClosed) and cancel.is_set():
                    continue
                error = f"{type(exc).__name__}: {exc}"
                cancel.set()
                log.error("aborting run: %s", error)
                if not isinstance(exc, (BackendError, GateClosed)):
                    raise exc
    finally:
        cancel_pending = cancel.is_set()
        if cancel_pending:
            for b in backends:
                b.gate.close()
        pool.shutdown(wait=True, cancel_futures=cancel_pending)
        writer.close()

    done_keys = {r.key for r in records}
    finished = all(k in done_keys for k in all_cells(models, config.contexts, config.trials_per_context))

    if finished and error is None and config.followup_enabled:
        have = {f.key for f in followups}
        fwriter = JsonlWriter(run_dir / FOLLOWUPS, config.fsync_every)
        try:
            for rec in sorted(records, key=lambda r: (r.trial, r.context_id, r.model)):
                if cancel.is_set():
                    break
                if not rec.valid or rec.key in have:
                    continue
                f = _run_followup(by_model[rec.model], bundles[rec.context_id], rec, config)
                fwriter.write(f.to_json())
                followups.append(f)
                calls_made += 1
        except (BackendError, GateClosed) as exc:
            error = f"{type(exc).__name__}: {exc}"
        finally:
            fwriter.close()
        finished = finished and not cancel.is_set() and error is None

    manifest["status"] = "complete" if finished and error is None else ("aborted" if error else "interrupted")
    manifest["ended_at"] = utcnow()
    manifest["error"] = error
    manifest["totals"] = compute_totals(records, followups, models)
    write_manifest(run_dir, manifest)
    reconcile(run_dir, manifest)

    for b in backends:
        b.close()
    records.sort(key=lambda r: r.key)
    return RunOutcome(run_dir, manifest, records, calls_made, error, followups)


def status(run_dir: str | Path) -> dict:
    """Progress summary of a run directory (read-only)."""
    from .store import read_records

    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    cfg = manifest["config"]
    records = read_records(run_dir)
    models = [b["model"] for b in cfg["backends"]]
    done = {r.key for r in records}
    cells = all_cells(models, cfg["contexts"], cfg["trials_per_context"])
    per_model = {m: {"done": 0, "remaining": 0} for m in models}
    for k in cells:
        per_model[k[0]]["done" if k in done else "remaining"] += 1
    return {
        "run_dir": str(run_dir),
        "status": manifest["status"],
        "expected_cells": len(cells),
        "completed_cells": sum(1 for k in cells if k in done),
        "per_model": per_model,
        "totals": compute_totals(records, read_followups(run_dir), models),
    }
