"""Command line entry point.

    riskprobe run --config exp.yaml
    riskprobe run --resume runs/pilot
    riskprobe status runs/pilot
    riskprobe metrics runs/pilot [--benchmark hl.txt] [--distance euclidean|l1]
    riskprobe report runs/pilot --format md --out reports/
    riskprobe export-fixture runs/pilot fixture.jsonl
    riskprobe contexts [--dump battery.txt]
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path

from .backends import BackendError, write_fixture
from .config import load_config
from .contexts import catalog, dump_contexts
from .metrics import DISTANCES, compute_metrics, holt_laury_benchmark, load_benchmark
from .report import Format, emit
from .runner import EXIT_ABORTED, RunDirExists, resume, run_experiment, status
from .store import read_followups, read_records

log = logging.getLogger("riskprobe")


def _cmd_run(args: argparse.Namespace) -> int:
    if args.resume:
        cfg, done = resume(args.resume)
        if args.config:
            fresh = load_config(args.config)
            fresh.output_dir = Path(args.resume)
            cfg = fresh
        log.info("resuming %s (%d cells already done)", args.resume, len(done))
    elif args.config:
        cfg = load_config(args.config)
    else:
        print("run: need --config and/or --resume", file=sys.stderr)
        return EXIT_ABORTED
    if args.workers:
        cfg.workers = args.workers

    cancel = threading.Event()

    def on_sigint(signum, frame):
        log.warning("interrupt received; finishing in-flight cells")
        cancel.set()

    previous = signal.signal(signal.SIGINT, on_sigint)
    try:
        outcome = run_experiment(cfg, resume_run=bool(args.resume), cancel=cancel)
    except RunDirExists as exc:
        print(f"run: {exc} (use --resume {cfg.output_dir})", file=sys.stderr)
        return EXIT_ABORTED
    except BackendError as exc:
        print(f"run: {exc}", file=sys.stderr)
        return EXIT_ABORTED
    finally:
        signal.signal(signal.SIGINT, previous)

    m = outcome.manifest
    print(f"{m['status']}: {sum(t['records'] for t in m['totals'].values())}/{m['expected_cells']} cells in {outcome.run_dir}")
    for model, t in m["totals"].items():
        print(f"  {model}: requests={t['api_requests']} input_tokens={t['input_tokens']} unwanted={t['unwanted']}")
    if outcome.error:
        print(f"error: {outcome.error}", file=sys.stderr)
    return outcome.exit_code


def _cmd_status(args: argparse.Namespace) -> int:
    print(json.dumps(status(args.run_dir), indent=2, sort_keys=True))
    return 0


def _metrics_for(args: argparse.Namespace):
    bench = load_benchmark(args.benchmark) if args.benchmark else holt_laury_benchmark()
    records = read_records(Path(args.run_dir))
    return compute_metrics(records, bench, args.distance), records


def _cmd_metrics(args: argparse.Namespace) -> int:
    metrics, _ = _metrics_for(args)
    doc = [m.to_dict() for m in metrics]
    text = json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    (Path(args.run_dir) / "metrics.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    metrics, records = _metrics_for(args)
    paths = emit(metrics, records, args.format, args.out, read_followups(Path(args.run_dir)))
    for p in paths:
        print(p)
    return 0


def _cmd_export_fixture(args: argparse.Namespace) -> int:
    entries = []
    for r in read_records(Path(args.run_dir)):
        for c in r.calls:
            e = {
                "model": r.model,
                "context_id": r.context_id,
                "trial": r.trial,
                "kind": "trial",
                "text": c.text,
                "input_tokens": c.input_tokens,
                "output_tokens": c.output_tokens,
                "tokens_estimated": c.tokens_estimated,
                "attempt": c.attempt,
            }
            if c.error:
                e["error"] = c.error
            entries.append(e)
    write_fixture(entries, args.out)
    print(f"{len(entries)} calls -> {args.out}")
    return 0


def _cmd_contexts(args: argparse.Namespace) -> int:
    if args.dump:
        dump_contexts(catalog(), args.dump)
        print(args.dump)
        return 0
    for c in catalog():
        print(f"{c.id:26s} {c.category.value:12s} {c.legend}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskprobe", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run or resume an experiment")
    r.add_argument("--config", type=Path)
    r.add_argument("--resume", type=Path, metavar="RUN_DIR")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("status", help="progress of a run directory")
    s.add_argument("run_dir", type=Path)
    s.set_defaults(func=_cmd_status)

    for name, func, help_ in (("metrics", _cmd_metrics, "compute metrics from persisted records"),
                              ("report", _cmd_report, "write report tables")):
        m = sub.add_parser(name, help=help_)
        m.add_argument("run_dir", type=Path)
        m.add_argument("--benchmark", type=Path, help="human benchmark file (default: bundled Holt-Laury vector)")
        m.add_argument("--distance", choices=sorted(DISTANCES), default="euclidean")
        if name == "report":
            m.add_argument("--format", choices=[f.value for f in Format], default="md")
            m.add_argument("--out", type=Path, required=True)
        m.set_defaults(func=func)

    e = sub.add_parser("export-fixture", help="turn a run into a replay fixture")
    e.add_argument("run_dir", type=Path)
    e.add_argument("out", type=Path)
    e.set_defaults(func=_cmd_export_fixture)

    c = sub.add_parser("contexts", help="list or dump the context battery")
    c.add_argument("--dump", type=Path)
    c.set_defaults(func=_cmd_contexts)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"{args.cmd}: {exc}", file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
