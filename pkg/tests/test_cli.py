import json

import pytest

from riskprobe.cli import main
from riskprobe.contexts import catalog, load_contexts
from riskprobe.runner import EXIT_ABORTED, EXIT_COMPLETE

CONFIG = """\
trials_per_context: 3
output_dir: run
contexts: [baseline, forget_ai_human, male, female, risk_avoiding, risk_loving]
followup: true
backends:
  - kind: synthetic
    model: crra
    default_r: 0.3
    context_r: {risk_avoiding: 1.2, risk_loving: -0.5, female: 0.5}
"""


@pytest.fixture
def run_dir(tmp_path, capsys):
    (tmp_path / "exp.yaml").write_text(CONFIG)
    assert main(["run", "--config", str(tmp_path / "exp.yaml")]) == EXIT_COMPLETE
    assert "complete: 18/18 cells" in capsys.readouterr().out
    return tmp_path / "run"


def test_run_refuses_existing_dir(run_dir, capsys):
    assert main(["run", "--config", str(run_dir.parent / "exp.yaml")]) == EXIT_ABORTED
    assert "--resume" in capsys.readouterr().err


def test_resume_complete_run(run_dir, capsys):
    assert main(["run", "--resume", str(run_dir)]) == EXIT_COMPLETE
    assert "requests=18" in capsys.readouterr().out


def test_status(run_dir, capsys):
    assert main(["status", str(run_dir)]) == 0
    assert json.loads(capsys.readouterr().out)["completed_cells"] == 18


def test_metrics_command(run_dir, capsys):
    assert main(["metrics", str(run_dir), "--distance", "l1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc[0]["mora"] == 6 and doc[0]["distance"] == "l1"
    assert (run_dir / "metrics.json").exists()


@pytest.mark.parametrize("fmt,name", [("md", "report.md"), ("csv", "metrics.csv"), ("json", "report.json")])
def test_report_command(run_dir, tmp_path, fmt, name):
    out = tmp_path / "rep"
    assert main(["report", str(run_dir), "--format", fmt, "--out", str(out)]) == 0
    assert (out / name).exists()


def test_export_fixture_then_replay(run_dir, tmp_path, capsys):
    fixture = tmp_path / "fx.jsonl"
    assert main(["export-fixture", str(run_dir), str(fixture)]) == 0
    (tmp_path / "replay.yaml").write_text(
        CONFIG.replace("output_dir: run", "output_dir: replayed").replace("followup: true", "followup: false")
        .split("backends:")[0]
        + "backends:\n  - kind: replay\n    model: crra\n    fixture: fx.jsonl\n"
    )
    assert main(["run", "--config", str(tmp_path / "replay.yaml")]) == EXIT_COMPLETE
    assert main(["metrics", str(run_dir)]) == main(["metrics", str(tmp_path / "replayed")]) == 0
    assert (run_dir / "metrics.json").read_text() == (tmp_path / "replayed" / "metrics.json").read_text()


def test_contexts_list_and_dump(tmp_path, capsys):
    assert main(["contexts"]) == 0
    assert "risk_avoiding" in capsys.readouterr().out
    assert main(["contexts", "--dump", str(tmp_path / "b.txt")]) == 0
    assert load_contexts(tmp_path / "b.txt") == catalog()


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == EXIT_ABORTED
