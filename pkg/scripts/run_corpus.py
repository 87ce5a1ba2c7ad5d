#!/usr/bin/env python3
"""Run every problem file in a directory and compare its ``expect`` lines.

Files run in parallel worker processes; each file is timed separately.
Exit status is 1 if any file fails.
"""
import argparse
import pathlib
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from divinv.cli import check_expectations, run_file
from divinv.errors import InversionError


def _one(path):
    t0 = time.perf_counter()
    try:
        prob, result = run_file(path)
        rows = check_expectations(prob, result)
        err = None
    except InversionError as e:
        rows, err = [], f"{type(e).__name__}: {e}"
    return path, rows, err, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("directory", nargs="?", default=str(pathlib.Path(__file__).parent.parent / "corpus"))
    ap.add_argument("-j", "--jobs", type=int, default=None)
    args = ap.parse_args()
    files = sorted(str(p) for p in pathlib.Path(args.directory).glob("*.prob"))
    t0 = time.perf_counter()
    with ProcessPoolExecutor(args.jobs) as pool:
        results = list(pool.map(_one, files))
    failed = 0
    for path, rows, err, dt in results:
        ok = err is None and all(r[1] for r in rows)
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {pathlib.Path(path).name:32s} {dt:6.2f}s")
        if err:
            print(f"    error: {err}")
        for key, good, got in rows:
            if not good:
                print(f"    {key}: got {got}")
    print(f"{len(files) - failed}/{len(files)} passed in {time.perf_counter() - t0:.1f}s")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
