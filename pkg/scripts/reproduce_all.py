"""Run every shipped config and print one line per assertion.

    python scripts/reproduce_all.py --jobs 4
    python scripts/reproduce_all.py --only bell spdc_filtered
"""
import argparse
import sys
import time
from pathlib import Path

from schmidt_mesh import config
from schmidt_mesh.cli import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", default="runs")
    parser.add_argument("--only", nargs="*", help="config stems to run")
    args = parser.parse_args()
    paths = sorted(CONFIGS.glob("*.toml"))
    if args.only:
        paths = [p for p in paths if p.stem in args.only]
    failed = 0
    for path in paths:
        cfg = config.load(path)
        start = time.perf_counter()
        report, code = run(cfg, Path(args.out) / path.stem, args.jobs)
        print(f"== {path.stem} ({time.perf_counter() - start:.1f} s)")
        for a in report["assertions"]:
            print(f"   {'PASS' if a['passed'] else 'FAIL'} {a['name']}: {a['detail']}")
        failed += code != 0
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
