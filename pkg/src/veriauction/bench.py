"""Benchmark the compiled kernel against the pure-Python fallback.

Usage: python -m veriauction.bench [--m 3] [--n 2] [--vmax 3] [--slice N]
"""

from __future__ import annotations

import argparse
import time

from . import kernels as py_kernels
from .backend import compiled_available, get_backend
from .family import table_size


def run(m: int, n: int, vmax: int, stop: int | None) -> None:
    nd = table_size(m, vmax)
    stop = nd if stop is None else min(stop, nd)

    results = {}
    timings = {}
    backends = [("python", py_kernels)]
    if compiled_available():
        backends.append(("compiled", get_backend()))

    for name, backend in backends:
        t0 = time.perf_counter()
        results[name] = backend.run_cell(m, n, vmax, 0, stop)
        timings[name] = time.perf_counter() - t0

    base = results["python"]
    print(f"cell m={m} n={n} vmax={vmax} first-index slice [0, {stop}) of {nd}")
    for name in results:
        res = results[name]
        rate = res["instances"] / timings[name] if timings[name] else float("inf")
        print(f"  {name:9s} {timings[name]:9.3f}s  {rate:12.0f} inst/s  checksum {res['checksum']}")
    if "compiled" in results:
        agree = all(results["compiled"][k] == base[k] for k in base)
        speedup = timings["python"] / timings["compiled"] if timings["compiled"] else float("inf")
        print(f"  agreement: {agree}  speedup: {speedup:.1f}x")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--m", type=int, default=3)
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--vmax", type=int, default=3)
    parser.add_argument("--slice", type=int, default=None, help="first-index prefix to scan")
    args = parser.parse_args(argv)
    run(args.m, args.n, args.vmax, args.slice)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
