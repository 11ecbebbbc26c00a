"""``schmidt-mesh`` command line: run experiments, diff reports, print oracle SVDs."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as config_mod
from .config import ConfigError
from .experiments import check_assertions, job_dir, plan_jobs, run_job, scaling_csv, summarize
from .linalg import svd_oracle
from .reporting import compare_reports, format_complex, load_state_csv
from .states import entropy_of_measured

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _check_finite(obj, where="report") -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite number at {where}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")


def _timed_job(args):
    cfg, job = args
    start = time.perf_counter()
    record, files = run_job(cfg, job)
    return record, files, time.perf_counter() - start


def run(cfg: dict, out_dir: str | Path | None = None, jobs: int = 1) -> tuple[dict, int]:
    """Execute a validated config; writes the artifacts and returns (report, exit code)."""
    out = Path(out_dir or cfg["output_dir"])
    planned = plan_jobs(cfg)
    start = time.perf_counter()
    tasks = [(cfg, job) for job in planned]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_timed_job, tasks))
    else:
        outcomes = [_timed_job(t) for t in tasks]

    records, timing, artifacts = [], {}, []
    for job, (record, files, seconds) in zip(planned, outcomes):
        sub = job_dir(job)
        for name, text in files.items():
            write_atomic(out / sub / name, text)
            artifacts.append(f"{sub}/{name}")
        records.append(record)
        timing[sub] = seconds
    summary = summarize(cfg, records)
    if cfg["scenario"] == "scaling":
        write_atomic(out / "scaling.csv", scaling_csv(records))
        artifacts.append("scaling.csv")
    assertions = check_assertions(cfg, records, summary)
    echo = {k: v for k, v in cfg.items() if not k.startswith("_")}
    report = {
        "config": echo,
        "runs": records,
        "summary": summary,
        "assertions": assertions,
        "passed": all(a["passed"] for a in assertions),
        "measurements_total": int(sum(r.get("report", {}).get("measurements", r.get("measurements", 0))
                                      for r in records)),
        "artifacts": sorted(artifacts + ["report.json", "timing.json"]),
    }
    _check_finite(report)
    write_atomic(out / "report.json", dumps(report))
    timing["total"] = time.perf_counter() - start
    write_atomic(out / "timing.json", dumps(timing))
    return report, EXIT_OK if report["passed"] else EXIT_ASSERT


def _cmd_run(args) -> int:
    try:
        cfg = config_mod.load(args.config)
        if args.seed is not None:
            cfg["seeds"] = [args.seed]
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, code = run(cfg, args.out, args.jobs)
    except (ValueError, OSError) as exc:
        # semantic problems surfacing from the builders (bad sizes, unreadable CSV, ...)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for a in report["assertions"]:
        print(f"{'PASS' if a['passed'] else 'FAIL'} {a['name']}: {a['detail']}")
    if code == EXIT_ASSERT:
        failed = ", ".join(a["name"] for a in report["assertions"] if not a["passed"])
        print(f"assertion failed: {failed}", file=sys.stderr)
    return code


def _cmd_compare(args) -> int:
    try:
        a = json.loads(Path(args.a).read_text())
        b = json.loads(Path(args.b).read_text())
        diff = compare_reports(a, b)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(dumps(diff), end="")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    try:
        state = load_state_csv(args.state)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    oracle = svd_oracle(state.g)
    print(dumps({
        "values": [float(v) for v in oracle.values],
        "entropy_bits": entropy_of_measured(oracle.values),
        "left": [[format_complex(z) for z in row] for row in oracle.left],
        "right": [[format_complex(z) for z in row] for row in oracle.right],
    }), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schmidt-mesh", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="run a single seed instead of the configured list")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent seeds")
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("compare", help="diff two report.json files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_compare)
    p = sub.add_parser("oracle", help="print the SVD of a state CSV")
    p.add_argument("state")
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
