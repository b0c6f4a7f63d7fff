"""Benchmark the compiled GaBP stage kernels against the numpy fallback.

Two views:
  * raw stage_forward / stage_backward throughput on synthetic stage data
  * end-to-end run_gabp (flooding) wall time, each backend in its own
    subprocess so the import-time backend selection applies

Usage: python benchmarks/gabp_kernels.py [--sizes 256,1024,4096] [--reps 50]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from ufft import _gabp_np

try:
    from ufft import _gabp_cy
except ImportError:
    _gabp_cy = None


def stage_data(rng, N):
    mean_in = rng.standard_normal((N, 2))
    a = rng.standard_normal((N, 2, 2))
    cov_in = a @ np.swapaxes(a, -1, -2) + 0.3 * np.eye(2)
    mean_op = rng.standard_normal((N, 2))
    b = rng.standard_normal((N, 2, 2))
    cov_op = b @ np.swapaxes(b, -1, -2) + 0.3 * np.eye(2)
    i0 = np.arange(0, N, 2, dtype=np.intp)
    i1 = i0 + 1
    w = np.exp(-2j * np.pi * rng.random(N // 2))
    return mean_in, cov_in, mean_op, cov_op, i0, i1, w.real.copy(), w.imag.copy()


def time_kernel(fn, args, out, reps):
    fn(*args, *out)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args, *out)
    return (time.perf_counter() - t0) / reps


END_TO_END = """
import time
import numpy as np
from ufft import kernels
from ufft.comms import sample_trial_pair, philox
from ufft.graph import build_graph, run_gabp

N = {N}
graph = build_graph(N)
pair = sample_trial_pair(N, philox(0))
ts, fs = pair.time_sites(), pair.freq_sites()
run_gabp(graph, ts, fs)  # warm up
t0 = time.perf_counter()
for _ in range({reps}):
    run_gabp(graph, ts, fs)
print(kernels.BACKEND, (time.perf_counter() - t0) / {reps})
"""


def run_end_to_end(N, reps, force_numpy):
    env = dict(os.environ)
    if force_numpy:
        env["UFFT_FORCE_NUMPY"] = "1"
    else:
        env.pop("UFFT_FORCE_NUMPY", None)
    out = subprocess.run(
        [sys.executable, "-c", END_TO_END.format(N=N, reps=reps)],
        capture_output=True, text=True, env=env, check=True,
    )
    backend, secs = out.stdout.split()
    return backend, float(secs)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="256,1024,4096")
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--e2e-reps", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    if _gabp_cy is None:
        print("compiled kernel not built; benchmarking numpy only")

    print(f"{'N':>6}  {'kernel':>14}  {'numpy (ms)':>11}  {'cython (ms)':>12}  {'speedup':>7}")
    for N in sizes:
        data = stage_data(rng, N)
        for name, np_fn, cy_fn in (
            ("stage_forward", _gabp_np.stage_forward,
             None if _gabp_cy is None else _gabp_cy.stage_forward),
            ("stage_backward", _gabp_np.stage_backward,
             None if _gabp_cy is None else _gabp_cy.stage_backward),
        ):
            out = (np.zeros((N, 2)), np.zeros((N, 2, 2)))
            t_np = time_kernel(np_fn, data, out, args.reps)
            if cy_fn is None:
                print(f"{N:>6}  {name:>14}  {1e3 * t_np:>11.3f}  {'-':>12}  {'-':>7}")
            else:
                t_cy = time_kernel(cy_fn, data, out, args.reps)
                print(f"{N:>6}  {name:>14}  {1e3 * t_np:>11.3f}  "
                      f"{1e3 * t_cy:>12.3f}  {t_np / t_cy:>6.1f}x")

    print()
    print(f"{'N':>6}  {'run_gabp flooding':>18}  {'seconds/run':>12}")
    for N in sizes:
        for force in (True, False) if _gabp_cy is not None else (True,):
            backend, secs = run_end_to_end(N, args.e2e_reps, force)
            print(f"{N:>6}  {backend:>18}  {secs:>12.4f}")


if __name__ == "__main__":
    main()
