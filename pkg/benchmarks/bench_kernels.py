"""Time the three hot kernels with numba enabled against the pure-python
fallback.

Run:  python3 benchmarks/bench_kernels.py
The script re-executes itself once with STEREOCOMFORT_NUMBA=0 so both
paths run in a clean interpreter, then prints one table.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

CASES = ("sad_disparity 96x128 r=4 +/-16", "min_vertical_seam 480x640",
         "smo_epsilon_svr n=120")


def _build_inputs():
    rng = np.random.default_rng(0)
    left = rng.random((96, 128)) * 255.0
    right = np.roll(left, 3, axis=1)
    energy = rng.random((480, 640))
    n = 120
    X = rng.normal(size=(n, 6))
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    K = np.exp(-d2 / 6.0)
    y = np.sin(X[:, 0]) + 0.1 * rng.normal(size=n)
    return left, right, energy, K, y


def _time(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_suite():
    from stereocomfort import _kernels
    from stereocomfort.disparity import candidate_order

    left, right, energy, K, y = _build_inputs()
    cands = candidate_order(-16, 16)
    # trigger compilation outside the timed region
    _kernels.sad_disparity(left[:16, :32], right[:16, :32], 4,
                           candidate_order(-4, 4), -4, 4, False)
    _kernels.min_vertical_seam(energy[:8, :8].copy())
    _kernels.smo_epsilon_svr(K[:8, :8].copy(), y[:8], 10.0, 0.1, 1e-3, 1000)
    times = [
        _time(lambda: _kernels.sad_disparity(left, right, 4, cands, -16, 16, False)),
        _time(lambda: _kernels.min_vertical_seam(energy)),
        _time(lambda: _kernels.smo_epsilon_svr(K, y, 10.0, 0.1, 1e-3, 200000)),
    ]
    return times


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--emit-json", action="store_true",
                        help="print timings as JSON (internal)")
    args = parser.parse_args()

    times = run_suite()
    if args.emit_json:
        print(json.dumps(times))
        return

    from stereocomfort import NUMBA_ENABLED

    if not NUMBA_ENABLED:
        print("numba is disabled in this process; timings below are the "
              "fallback only")
        for name, t in zip(CASES, times):
            print(f"{name:36s} {t * 1e3:9.2f} ms")
        return

    env = dict(os.environ, STEREOCOMFORT_NUMBA="0")
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--emit-json"],
        env=env, capture_output=True, text=True, check=True,
    )
    fallback = json.loads(out.stdout.strip().splitlines()[-1])

    print(f"{'kernel':36s} {'numba':>10s} {'python':>10s} {'speedup':>9s}")
    for name, tj, tp in zip(CASES, times, fallback):
        print(f"{name:36s} {tj * 1e3:8.2f}ms {tp * 1e3:8.2f}ms {tp / tj:8.1f}x")


if __name__ == "__main__":
    main()
