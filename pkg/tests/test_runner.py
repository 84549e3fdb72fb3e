import json
import threading

import pytest

from riskprobe.backends import Backend, CompletionResult, ConfigurationError, FixtureError, TransportError
from riskprobe.config import ExperimentConfig, config_from_dict, load_config
from riskprobe.runner import (
    EXIT_ABORTED,
    EXIT_COMPLETE,
    EXIT_COMPLETE_WITH_UNWANTED,
    RunDirExists,
    all_cells,
    remaining_cells,
    resume,
    run_experiment,
    status,
)
from riskprobe.store import (
    MANIFEST,
    QUARANTINE,
    RECORDS,
    AccountingError,
    read_followups,
    read_manifest,
    read_records,
    reconcile,
    write_manifest,
)


def synthetic(model="crra", **extra):
    return {"kind": "synthetic", "model": model, "default_r": 0.3,
            "context_r": {"risk_avoiding": 1.2, "risk_loving": -0.5}, **extra}


def cfg(tmp_path, backends=None, **kw):
    kw.setdefault("contexts", ["baseline", "risk_avoiding"])
    return ExperimentConfig(backends=backends or [synthetic()], output_dir=tmp_path / "run", **kw)


class Scripted(Backend):
    """Answers from a function of (context, trial, call); counts calls."""

    kind = "scripted"

    def __init__(self, model, answer):
        super().__init__(model)
        self.answer = answer
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, bundle, params, *, trial=None, call=0):
        with self._lock:
            self.calls += 1
        out = self.answer(bundle.context_id, trial, call, bundle.is_followup)
        if isinstance(out, Exception):
            raise out
        return CompletionResult(out, 100, 1, 0.0, 1, False)

    def describe(self):
        return {"kind": self.kind, "model": self.model}


def test_all_cells_order():
    cells = all_cells(["a", "b"], ["x", "y"], 2)
    assert cells[:4] == [("a", "x", 1), ("b", "x", 1), ("a", "y", 1), ("b", "y", 1)]
    assert len(cells) == len(set(cells)) == 8


def test_synthetic_run_is_complete(tmp_path):
    out = run_experiment(cfg(tmp_path))
    assert len(out.records) == 70
    assert all(r.valid for r in out.records)
    assert out.exit_code == EXIT_COMPLETE
    t = out.manifest["totals"]["crra"]
    assert (t["records"], t["unwanted"], t["api_requests"]) == (70, 0, 70)
    assert reconcile(out.run_dir) == out.manifest["totals"]


def test_manifest_contents(tmp_path):
    out = run_experiment(cfg(tmp_path, backends=[synthetic(noise=0.1, rng_seed=9)]))
    m = read_manifest(out.run_dir)
    assert m["status"] == "complete" and m["started_at"] and m["ended_at"]
    assert m["rng_seeds"]["crra"] == 9
    assert m["config"]["fresh_conversation_per_trial"] is True
    assert m["expected_cells"] == 70


def test_unknown_context_rejected_before_any_call(tmp_path):
    b = Scripted("s", lambda *a: "5")
    with pytest.raises(ConfigurationError, match="nowhere"):
        run_experiment(cfg(tmp_path, backends=[b], contexts=["baseline", "nowhere"]))
    assert b.calls == 0
    assert not (tmp_path / "run").exists()


def test_config_from_dict_rejects_unknown_context(tmp_path):
    with pytest.raises(ConfigurationError):
        config_from_dict({"backends": [synthetic()], "output_dir": "x", "contexts": ["mars"]}, tmp_path)


def test_duplicate_model_names_rejected(tmp_path):
    with pytest.raises(ConfigurationError):
        run_experiment(cfg(tmp_path, backends=[synthetic("a"), synthetic("a")]))


def test_existing_run_dir_requires_resume(tmp_path):
    run_experiment(cfg(tmp_path))
    with pytest.raises(RunDirExists):
        run_experiment(cfg(tmp_path))


def test_reask_then_valid(tmp_path):
    b = Scripted("s", lambda ctx, t, call, fu: "Decision 6" if call == 0 else "6")
    out = run_experiment(cfg(tmp_path, backends=[b], trials_per_context=3))
    assert all(r.switch == 6 and r.reasks == 1 and r.attempts == 2 for r in out.records)
    assert out.manifest["totals"]["s"]["api_requests"] == 12
    assert out.exit_code == EXIT_COMPLETE


def test_unwanted_after_reask(tmp_path):
    b = Scripted("s", lambda ctx, t, call, fu: "11" if ctx == "baseline" else "4")
    out = run_experiment(cfg(tmp_path, backends=[b], trials_per_context=2))
    bad = [r for r in out.records if not r.valid]
    assert len(bad) == 2 and all(r.unwanted_reason == "out-of-range" and len(r.calls) == 2 for r in bad)
    assert out.exit_code == EXIT_COMPLETE_WITH_UNWANTED


def test_no_reask_when_disabled(tmp_path):
    b = Scripted("s", lambda *a: "maybe")
    out = run_experiment(cfg(tmp_path, backends=[b], trials_per_context=2, reask_unwanted=False))
    assert b.calls == 4 and all(len(r.calls) == 1 for r in out.records)


def test_transport_failure_recorded_as_unwanted(tmp_path):
    b = Scripted("s", lambda ctx, t, call, fu: TransportError("down", attempts=3, reason="http_503") if t == 1 else "5")
    out = run_experiment(cfg(tmp_path, backends=[b], trials_per_context=2))
    failed = [r for r in out.records if r.trial == 1]
    assert all(r.unwanted_reason == "transport" and r.attempts == 3 and r.calls[0].error == "http_503" for r in failed)
    assert out.manifest["totals"]["s"]["api_requests"] == 2 * 3 + 2


def test_backend_error_aborts(tmp_path):
    b = Scripted("s", lambda ctx, t, call, fu: FixtureError("no fixture") if t == 3 else "5")
    out = run_experiment(cfg(tmp_path, backends=[b], trials_per_context=5, workers=1))
    assert out.manifest["status"] == "aborted"
    assert out.exit_code == EXIT_ABORTED
    assert "no fixture" in out.error
    reconcile(out.run_dir)


def test_followups_for_valid_records_only(tmp_path):
    b = Scripted("s", lambda ctx, t, call, fu: "Because." if fu else ("5" if t != 2 else "x"))
    out = run_experiment(cfg(tmp_path, backends=[b], trials_per_context=3, followup_enabled=True))
    fus = read_followups(out.run_dir)
    assert len(fus) == 4 and {f.trial for f in fus} == {1, 3}
    assert all(f.response == "Because." for f in fus)
    t = out.manifest["totals"]["s"]
    assert (t["followups"], t["followup_requests"]) == (4, 4)


def _cancel_halfway(total):
    cancel = threading.Event()
    seen = []

    def on_record(rec):
        seen.append(rec)
        if len(seen) >= total // 2:
            cancel.set()

    return cancel, on_record


def test_cancel_then_resume_matches_uninterrupted(tmp_path):
    full = run_experiment(cfg(tmp_path / "a", backends=[synthetic(noise=0.2, rng_seed=4)]))
    c = cfg(tmp_path / "b", backends=[synthetic(noise=0.2, rng_seed=4)])
    cancel, on_record = _cancel_halfway(70)
    part = run_experiment(c, cancel=cancel, on_record=on_record)
    assert part.manifest["status"] == "interrupted" and part.exit_code == EXIT_ABORTED
    assert 35 <= len(part.records) < 70

    resumed_cfg, done = resume(c.output_dir)
    assert len(remaining_cells(resumed_cfg, done)) == 70 - len(done)
    out = run_experiment(resumed_cfg, resume_run=True)
    keys = [r.key for r in read_records(out.run_dir)]
    assert len(keys) == len(set(keys)) == 70
    assert [r.comparable() for r in out.records] == [r.comparable() for r in full.records]
    assert out.manifest["totals"] == full.manifest["totals"]
    assert out.calls_made == 70 - len(done)


def test_resume_of_complete_run_makes_no_calls(tmp_path):
    run_experiment(cfg(tmp_path))
    c, done = resume(tmp_path / "run")
    assert remaining_cells(c, done) == []
    out = run_experiment(c, resume_run=True)
    assert out.calls_made == 0 and len(out.records) == 70


def test_corrupt_line_is_quarantined_and_rerun(tmp_path):
    out = run_experiment(cfg(tmp_path))
    path = out.run_dir / RECORDS
    lines = path.read_text().splitlines()
    victim = json.loads(lines[10])
    lines[10] = lines[10][: len(lines[10]) // 2]  # torn write
    lines.append(lines[0])  # duplicate cell
    path.write_text("\n".join(lines) + "\n")

    c, done = resume(out.run_dir)
    assert (victim["model"], victim["context_id"], victim["trial"]) not in done
    assert len((out.run_dir / QUARANTINE).read_text().splitlines()) == 2
    again = run_experiment(c, resume_run=True)
    assert again.calls_made == 1
    keys = [r.key for r in read_records(out.run_dir, strict=True)]
    assert len(keys) == len(set(keys)) == 70


def test_reconcile_detects_tampering(tmp_path):
    out = run_experiment(cfg(tmp_path))
    m = read_manifest(out.run_dir)
    m["totals"]["crra"]["api_requests"] += 1
    write_manifest(out.run_dir, m)
    with pytest.raises(AccountingError):
        reconcile(out.run_dir)


def test_status_reports_progress(tmp_path):
    c = cfg(tmp_path)
    cancel, on_record = _cancel_halfway(70)
    run_experiment(c, cancel=cancel, on_record=on_record)
    s = status(c.output_dir)
    assert s["expected_cells"] == 70 and s["status"] == "interrupted"
    assert s["completed_cells"] + s["per_model"]["crra"]["remaining"] == 70


def test_yaml_config(tmp_path):
    (tmp_path / "battery.txt").write_text("id: pirate\ncategory: Identity\nlegend: Pirate\ntext: Arr.\n")
    (tmp_path / "exp.yaml").write_text(
        "trials_per_context: 2\noutput_dir: out\ncontexts_file: battery.txt\n"
        "params: {temperature: 0.5}\nbackends:\n  - kind: synthetic\n    model: s\n    default_r: 0.0\n"
    )
    c = load_config(tmp_path / "exp.yaml")
    assert c.contexts[-1] == "pirate" and len(c.contexts) == 12
    assert c.output_dir == tmp_path / "out" and c.params.temperature == 0.5
    out = run_experiment(c)
    assert len(out.records) == 24
    # resume rebuilds the custom context from the manifest snapshot
    c2, _ = resume(out.run_dir)
    assert c2.context_specs()[-1].text == "Arr."
    assert (out.run_dir / MANIFEST).exists()
