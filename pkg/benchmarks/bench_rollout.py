#!/usr/bin/env python3
"""Compare the pure-numpy rollout kernel against the jitted one.

Run from a checkout with the package installed:

    python benchmarks/bench_rollout.py [rollouts]

Set IRPLAN_NUMBA=0 to confirm the numpy fallback path is the one measured.
"""

import sys

from irplan._kernels import USING_NUMBA
from irplan.bench import kernel_benchmark


def main() -> int:
    m = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    print(f"rollouts: {m}")
    print(f"jit backend active: {USING_NUMBA}")
    timings = kernel_benchmark(m_rollouts=m)
    for name, seconds in timings.items():
        print(f"  {name:>6}: {seconds * 1000:8.2f} ms")
    if "numba" in timings and "numpy" in timings:
        speedup = timings["numpy"] / timings["numba"]
        print(f"speedup: {speedup:.1f}x (results byte-identical)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
