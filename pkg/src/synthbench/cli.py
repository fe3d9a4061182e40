"""Command line entry points.

Exit codes: 0 on success, 1 on configuration or input errors, 2 when the run
finished but some cells or analyses recorded failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import load_adhoc
from .errors import ConfigError, SynthbenchError
from .estimands import load_fitspecs
from .harness import (
    benchmark_generation,
    emit_tables,
    load_config,
    load_original,
    metric_rows,
    read_report,
    run_experiment,
)
from .metrics import UtilityReport
from .synthesis import build_spec, load_synthetic_set, save_synthetic_set, synthesize


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="synthbench",
        description="Generate synthetic tabular datasets and measure their utility.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize one labelled configuration")
    g.add_argument("--config", required=True, help="experiment config JSON")
    g.add_argument("--spec", required=True, metavar="LABEL", help="synthesizer label, e.g. D or CPOT")
    g.add_argument("--m", type=int, required=True, help="number of datasets")
    g.add_argument("--seed", type=int, default=None, help="override the config seed")
    g.add_argument("--out", default=None, help="output directory (default: <config out>/synth/<LABEL>_m<m>)")

    e = sub.add_parser("evaluate", help="score an existing synthetic set against the original")
    e.add_argument("--config", required=True)
    e.add_argument("--syn", required=True, help="directory written by generate")
    e.add_argument("--out", required=True, help="directory for report.csv")

    x = sub.add_parser("experiment", help="run the full grid and emit tables")
    x.add_argument("--config", required=True)
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--out", default=None)
    x.add_argument("--jobs", type=int, default=1)
    x.add_argument("--resume", action="store_true", help="reuse finished cells in the output directory")

    b = sub.add_parser("bench", help="time serial generation of many datasets")
    b.add_argument("--config", required=True)
    b.add_argument("--spec", required=True, metavar="LABEL")
    b.add_argument("--count", type=int, default=100)

    r = sub.add_parser("report", help="rebuild tables from an existing report.csv")
    r.add_argument("--out", required=True, help="experiment output directory")
    r.add_argument("--tables", nargs="*", default=None, help="specific tables (default: all available)")
    return p


def _find_entry(cfg, label: str):
    for entry, proper, lbl in cfg.labels():
        if lbl == label:
            return entry, proper
    raise ConfigError(f"label {label!r} is not in the configured grid")


def _cmd_generate(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    entry, proper = _find_entry(cfg, args.spec)
    original = load_original(cfg)
    spec = build_spec(
        original.schema,
        entry.base,
        order=entry.order,
        own_order=entry.own_order,
        proper=proper,
        m=args.m,
        seed=cfg.seed,
        pmm_k=cfg.pmm_k,
        min_leaf=cfg.min_leaf,
    )
    sset = synthesize(original, spec)
    out = Path(args.out) if args.out else cfg.out / "synth" / f"{args.spec}_m{args.m}"
    save_synthetic_set(sset, out)
    print(f"wrote {sset.m} datasets to {out}")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    original = load_original(cfg)
    sset = load_synthetic_set(args.syn, original.schema)
    fits = load_fitspecs(cfg.fitspecs) if (cfg.metrics.regression and cfg.fitspecs) else ()
    predicates = load_adhoc(cfg.adhoc) if (cfg.metrics.adhoc and cfg.adhoc) else ()
    rows, errors = metric_rows(original, sset, cfg.metrics, fits, predicates)
    report = UtilityReport()
    for metric, scope, value in rows:
        report.add(sset.label, "simple", sset.m, 0, metric, scope, value)
    for stage, message in errors:
        report.add_error(sset.label, "simple", sset.m, 0, stage, message)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .harness import _write_report_files

    _write_report_files(report, out)
    print(f"evaluated {sset.label} (m={sset.m}); report in {out}")
    return 2 if errors else 0


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config, seed=args.seed, out=args.out)
    report, timings = run_experiment(cfg, jobs=args.jobs, resume=args.resume)
    written = emit_tables(report, cfg.out, timings)
    n_rows = len(report.rows)
    print(f"report rows: {n_rows}; tables: {', '.join(sorted(written)) or 'none'}")
    if report.errors:
        print(f"{len(report.errors)} stage failures; see errors.csv", file=sys.stderr)
        return 2
    return 0


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    record = benchmark_generation(cfg, args.spec, args.count)
    mean = record.total / len(record.seconds)
    print(
        f"{args.spec}: {len(record.seconds)} datasets in {record.total:.3f}s "
        f"({mean:.4f}s per dataset)"
    )
    return 0


def _cmd_report(args) -> int:
    out = Path(args.out)
    report = read_report(out)
    requested = tuple(args.tables) if args.tables else None
    written = emit_tables(report, out, None, requested)
    for name in sorted(written):
        print(f"{name}: {written[name]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "evaluate": _cmd_evaluate,
        "experiment": _cmd_experiment,
        "bench": _cmd_bench,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except SynthbenchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
