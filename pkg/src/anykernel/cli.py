"""Command line entry point: ``anykernel run | eval | plot | batch-learn``.

Exit codes: 0 when every checked bound holds, 2 when a bound is violated,
1 on a usage, configuration or input error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import experiments
from .batch import LabeledSample, rkhs_ball_learner
from .config import ConfigError, build_kernel, config_from_dict, load_config
from .evaluate import read_csv, write_csv
from .graphs import read_graph, write_graph
from .svg import loglog_chart, thin
from .transcript_io import TranscriptFormatError, kernel_hash, read_transcript, write_transcript

log = logging.getLogger("anykernel")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2
OUT_DIR_ENV = "ANYKERNEL_OUT_DIR"
METRIC_FIELDS = ["metric", "value", "bound", "passed"]


def resolve_out_dir(flag: str | None, config_value: str | None) -> Path:
    """--out-dir beats $ANYKERNEL_OUT_DIR beats the config's out_dir beats ./out."""
    for candidate in (flag, os.environ.get(OUT_DIR_ENV), config_value):
        if candidate:
            return Path(candidate)
    return Path("out")


def _load(args):
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config or --preset")
    if args.config:
        config = load_config(args.config)
    else:
        config = experiments.preset(args.preset)
    data = config.as_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.T is not None:
        data["T"] = args.T
    return config_from_dict(data, args.config or f"preset {args.preset}")


def _print_metrics(rows, stream=sys.stdout):
    for row in rows:
        status = "ok" if row["passed"] else "VIOLATED"
        stream.write(f"{row['metric']:<32} {row['value']:>14.6g}  bound {row['bound']:>12.6g}  {status}\n")


def _write_plot(curve, path: Path, title: str) -> None:
    label, ts, errs, bounds = curve
    xs, ys = thin(ts, errs)
    bx, by = thin(ts, bounds)
    path.write_text(loglog_chart([(f"|OI error|, {label}", xs, ys), ("bound", bx, by)], title),
                    encoding="utf-8")


def run_one(config, out_dir: Path) -> list:
    out_dir.mkdir(parents=True, exist_ok=True)
    result = experiments.execute(config)
    if result.transcript is not None:
        write_transcript(result.transcript, out_dir / "transcript.jsonl", config=config.as_dict())
    if result.graph is not None:
        write_graph(result.graph, out_dir / "graph.txt")
    if config.mode == "batch":
        alpha = result.extra["alpha"]
        write_csv([{"index": i, "alpha": float(a)} for i, a in enumerate(alpha)], out_dir / "alpha.csv")
    write_csv(result.metrics, out_dir / "metrics.csv", METRIC_FIELDS)
    if result.curve is not None:
        _write_plot(result.curve, out_dir / "oi_error.svg", config.name or config.mode)
    return result.metrics


def _run_replication(payload):
    data, out_dir = payload
    config = config_from_dict(data, "replication")
    return run_one(config, Path(out_dir))


def cmd_run(args) -> int:
    config = _load(args)
    out_dir = resolve_out_dir(args.out_dir, config.out_dir)
    if args.replications <= 1:
        rows = run_one(config, out_dir)
        _print_metrics(rows)
        return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VIOLATION
    payloads = []
    for r in range(args.replications):
        data = config.as_dict()
        data["seed"] = config.seed + r
        payloads.append((data, str(out_dir / f"rep-{r:03d}")))
    with ProcessPoolExecutor(max_workers=args.workers) as pool:
        results = list(pool.map(_run_replication, payloads))
    merged = []
    for r, rows in enumerate(results):
        for row in rows:
            merged.append({"replication": r, "seed": config.seed + r, **row})
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(merged, out_dir / "metrics.csv", ["replication", "seed"] + METRIC_FIELDS)
    failed = [row for row in merged if not row["passed"]]
    sys.stdout.write(f"{args.replications} replications, {len(failed)} violated metric rows\n")
    for row in failed:
        sys.stdout.write(f"  replication {row['replication']}: {row['metric']} {row['value']:.6g} "
                         f"> {row['bound']:.6g}\n")
    return EXIT_OK if not failed else EXIT_VIOLATION


def _read_run(args):
    graph = read_graph(args.graph) if args.graph else None
    if graph is None:
        sibling = Path(args.transcript).with_name("graph.txt")
        if sibling.exists():
            graph = read_graph(sibling)
    transcript, header = read_transcript(args.transcript, graph)
    config = experiments.config_from_header(header)
    kernel = experiments.make_kernel(config)
    if kernel_hash(kernel.describe()) != header.get("kernel_sha256"):
        log.warning("kernel hash in %s does not match the kernel rebuilt from its config", args.transcript)
    return transcript, config, graph


def cmd_eval(args) -> int:
    transcript, config, graph = _read_run(args)
    rows, _ = experiments.metrics_for(config, transcript, graph)
    out = Path(args.out) if args.out else Path(args.transcript).with_name("metrics.eval.csv")
    write_csv(rows, out, METRIC_FIELDS)
    _print_metrics(rows)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_VIOLATION


def cmd_plot(args) -> int:
    transcript, config, graph = _read_run(args)
    _, curve = experiments.metrics_for(config, transcript, graph)
    if curve is None:
        raise ConfigError(f"no OI curve is defined for mode {config.mode!r}")
    out = Path(args.out) if args.out else Path(args.transcript).with_name("oi_error.svg")
    _write_plot(curve, out, config.name or config.mode)
    sys.stdout.write(f"wrote {out}\n")
    return EXIT_OK


def cmd_batch_learn(args) -> int:
    rows = read_csv(args.sample)
    if not rows or "y" not in rows[0]:
        raise ConfigError(f"{args.sample}: need a header with feature columns and a 'y' column")
    feature_cols = [c for c in rows[0] if c not in ("y", "schema_version")]
    try:
        X = np.array([[float(r[c]) for c in feature_cols] for r in rows])
        y = np.array([float(r["y"]) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{args.sample}: {exc}") from None
    try:
        sample = LabeledSample([(x, None) for x in X], y)
    except ValueError as exc:
        raise ConfigError(f"{args.sample}: {exc}") from None
    sol = rkhs_ball_learner(sample, build_kernel(args.kernel), args.radius)
    write_csv([{"index": i, "alpha": float(a)} for i, a in enumerate(sol.alpha)], args.out)
    sys.stdout.write(f"value {sol.value!r}\nwrote {args.out}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anykernel", description="Kernel outcome-indistinguishable online prediction.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a TOML config or a named preset")
    run.add_argument("--config")
    run.add_argument("--preset", choices=sorted(experiments.PRESETS))
    run.add_argument("--seed", type=int)
    run.add_argument("--T", type=int, help="override the number of rounds")
    run.add_argument("--out-dir")
    run.add_argument("--replications", type=int, default=1)
    run.add_argument("--workers", type=int, default=None)
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="recompute metrics from a saved transcript")
    ev.add_argument("transcript")
    ev.add_argument("--graph")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    plot = sub.add_parser("plot", help="draw the cumulative OI error of a saved transcript")
    plot.add_argument("transcript")
    plot.add_argument("--graph")
    plot.add_argument("--out")
    plot.set_defaults(func=cmd_plot)

    bl = sub.add_parser("batch-learn", help="fit the RKHS-ball learner to a labeled CSV sample")
    bl.add_argument("--sample", required=True)
    bl.add_argument("--kernel", required=True)
    bl.add_argument("--radius", type=float, default=1.0)
    bl.add_argument("--out", required=True)
    bl.set_defaults(func=cmd_batch_learn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TranscriptFormatError, OSError, ValueError) as exc:
        sys.stderr.write(f"anykernel: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
