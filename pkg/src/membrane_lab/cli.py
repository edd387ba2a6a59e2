"""Command line entry point ``membrane-lab``.

    membrane-lab <experiment> [--config PATH] [--out DIR] [--seed N] [--override section.key=value]...

Writes ``summary.json`` (schema 1), one CSV per table, ``plot.gp`` and,
when ``output.snapshots`` is on, binary snapshots into the output
directory.  Exit status: 0 when every check passed, 1 when a check failed,
2 on errors (bad configuration, module failure); errors also leave a
machine-readable record in ``summary.json`` when the directory is writable.
``MEMBRANE_LAB_THREADS`` caps the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import EXPERIMENTS, ConfigError, apply_override, parse_config
from .experiments import ExperimentResult, run_driver
from .snapshot import export_snapshot

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _cell(x) -> str:
    # repr round-trips floats exactly and is platform independent
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_cell(v) for v in row])


def plot_script(result: ExperimentResult) -> str:
    lines = [
        "# gnuplot script; run with: gnuplot -p plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set grid",
    ]
    for table, x, ys, title, logy in result.plots:
        header = result.tables[table][0]
        xi = header.index(x) + 1
        lines.append(f"set title '{title}'")
        lines.append("set logscale y" if logy else "unset logscale y")
        curves = [f"'{table}.csv' using {xi}:{header.index(y) + 1} with linespoints" for y in ys]
        lines.append("plot " + ", \\\n     ".join(curves))
        lines.append("pause -1 'press return for the next plot'")
    return "\n".join(lines) + "\n"


def write_artifacts(result: ExperimentResult, out: Path, config, seed: int, started: str, elapsed: float, snapshots: bool) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in result.tables.items():
        write_csv(out / f"{name}.csv", header, rows)
        written.append(f"{name}.csv")
    if result.plots:
        (out / "plot.gp").write_text(plot_script(result))
        written.append("plot.gp")
    if snapshots:
        for name, field_ in result.snapshots.items():
            export_snapshot(field_, out / f"{name}.snap")
            written.append(f"{name}.snap")
    summary = {
        "schema": SCHEMA_VERSION,
        "experiment": result.experiment,
        "version": __version__,
        "seed": seed,
        "passed": result.passed,
        "checks": result.checks,
        "results": result.summary,
        "config": config.values,
        "artifacts": written,
        "started": started,
        "elapsed_s": elapsed,
    }
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return written


def _error_record(out: Path | None, experiment: str, exc: Exception, code: int) -> None:
    record = {
        "schema": SCHEMA_VERSION,
        "experiment": experiment,
        "version": __version__,
        "passed": False,
        "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code},
    }
    print(json.dumps(record["error"]), file=sys.stderr)
    if out is None:
        return
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    except OSError:
        pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="membrane-lab", description="Run one membrane experiment and write its artifacts.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, help="configuration file (defaults apply when omitted)")
    p.add_argument("--out", type=Path, help="output directory (default: output.dir from the config)")
    p.add_argument("--seed", type=int, help="seed for randomized sweeps (overrides output.seed)")
    p.add_argument("--override", action="append", default=[], metavar="section.key=value")
    return p


def _threads():
    raw = os.environ.get("MEMBRANE_LAB_THREADS")
    if raw is None or raw.strip() == "":
        return None
    n = int(raw)
    if n < 1:
        raise ValueError(f"MEMBRANE_LAB_THREADS must be a positive integer, got {raw!r}")
    return n


def run_experiment(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        text = args.config.read_text() if args.config is not None else ""
        config = parse_config(text, args.experiment)
        for ov in args.override:
            config = apply_override(config, ov)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
            config = apply_override(config, f"output.seed={args.seed}")
        out = Path(config["output.dir"]) if out is None else out
        seed = config["output.seed"]
        threads = _threads()
        started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        t0 = time.perf_counter()
        with threadpool_limits(limits=threads):
            result = run_driver(config, args.experiment, seed)
        elapsed = time.perf_counter() - t0
        write_artifacts(result, out, config, seed, started, elapsed, config["output.snapshots"])
    except (ConfigError, OSError, ValueError, FloatingPointError, IndexError) as exc:
        _error_record(out, args.experiment, exc, EXIT_ERROR)
        return EXIT_ERROR
    for name, ok in result.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{args.experiment}: {'all checks passed' if result.passed else 'some checks failed'} ({out})")
    return EXIT_OK if result.passed else EXIT_FAILED


def main(argv=None) -> None:
    sys.exit(run_experiment(argv))


if __name__ == "__main__":
    main()
