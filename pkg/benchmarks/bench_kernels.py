"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N] [--end-to-end]

Kernel timings run both backends in-process. ``--end-to-end`` also times one
phase optimization in two subprocesses, one with CMISAC_DISABLE_NUMBA=1.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from cmisac import _kernels as K


def _cases(rng):
    # candidate scans sized like an L=64, oversampling 2 objective
    n = 129 * 257
    P = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    Q = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    R = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    P[0] = 50.0
    side = np.arange(1, n // 2, dtype=np.int64)
    thetas = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    cost = rng.standard_normal((64, 64))
    Y = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    rot = np.exp(2j * np.pi * np.arange(4) / 4)
    return {
        "candidate_psl": ((P, Q, R, side, 0, thetas), {}),
        "candidate_logpnorm": ((P, Q, R, side, 0, thetas, 16.0), {}),
        "hungarian_min (64x64)": ((cost,), {}),
        "best_psk_cells (64x64, QPSK)": ((Y, rot), {}),
    }


PAIRS = {
    "candidate_psl": ("candidate_psl_numpy", "candidate_psl_numba"),
    "candidate_logpnorm": ("candidate_logpnorm_numpy", "candidate_logpnorm_numba"),
    "hungarian_min (64x64)": ("hungarian_min_numpy", "hungarian_min_numba"),
    "best_psk_cells (64x64, QPSK)": ("best_psk_cells_numpy", "best_psk_cells_numba"),
}


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, (args, kw) in _cases(rng).items():
        row = []
        for fn_name in PAIRS[name]:
            fn = getattr(K, fn_name)
            fn(*args, **kw)  # warm up, compiles the jitted variant
            row.append(min(timeit.repeat(lambda: fn(*args, **kw), number=1, repeat=repeat)) * 1e3)
        print(f"{name:32s} {row[0]:10.2f} {row[1]:10.2f} {row[0] / row[1]:7.1f}x")


E2E = """
import time
import numpy as np
from cmisac.optimizer import optimize_phases, OptimizerConfig
from cmisac.signal import WaveformParams
p = WaveformParams(L=16, oversampling=2)
f = np.random.default_rng(1).integers(0, 16, 16)
optimize_phases(f[:4], WaveformParams(L=4, M=16, oversampling=2), OptimizerConfig(restarts=1))
t = time.perf_counter()
r = optimize_phases(f, p, OptimizerConfig(restarts=2))
print(time.perf_counter() - t, r.psl_after)
"""


def bench_end_to_end():
    print("\noptimize_phases, L=16, 2 restarts")
    for flag, label in (("1", "numpy"), ("", "numba")):
        env = dict(os.environ, CMISAC_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        secs, value = out.stdout.split()
        print(f"  {label:6s} {float(secs):8.2f} s   psl {float(value):.6f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    a = ap.parse_args()
    if not K.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    bench_kernels(a.repeat)
    if a.end_to_end:
        bench_end_to_end()
