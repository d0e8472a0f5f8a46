"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 7] [--csv out.csv]

Each kernel is timed on both backends with the same inputs; the best of
``--repeat`` runs is reported together with the speedup and the largest
absolute difference between the two outputs. A full solver iteration is
timed by reloading the package under ``ERD_BACKEND``.
"""

import argparse
import csv
import importlib
import math
import os
import subprocess
import sys
import timeit

import numpy as np

from erd import kernels

VMIN, VMAX = math.log(1e-4), math.log(4.0)


def kernel_cases(n, seed):
    rng = np.random.default_rng(seed)
    t = rng.standard_normal((4, n, n))
    y, prev = rng.standard_normal((2, 4, n, n))
    i, r, u, y1 = rng.standard_normal((4, n, n))
    v = rng.uniform(-3, 1, (n, n))
    return {
        "dphi p=0.5": lambda k: k.dphi(t, kernels.POWER, 0.5, 1e-5),
        "dphi p=0.8": lambda k: k.dphi(t, kernels.POWER, 0.8, 1e-5),
        "dphi log": lambda k: k.dphi(t, kernels.LOG, 2.0, 1e-5),
        "phi_sum p=0.8": lambda k: k.phi_sum(t, kernels.POWER, 0.8),
        "mm_step p=0.8": lambda k: k.mm_step(t, y, prev, 0.01, 100.0, kernels.POWER, 0.8, 1e-5),
        "v_update": lambda k: k.v_update(i, r, v, u, y1, 200.0, 100.0, 100.0, VMIN, VMAX),
        "y1_update": lambda k: k.y1_update(y1, u, v, 100.0, VMIN, VMAX),
    }


def best_of(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


STEP_SNIPPET = """
import timeit, numpy as np
from erd import kernels
from erd.solver import SolverConfig, init_state, step
rng = np.random.default_rng(0)
f = np.clip(0.5 + 0.1 * rng.standard_normal(({n}, {n})), 0, 1)
cfg = SolverConfig()
s = init_state(f, cfg)
for _ in range(3):
    s = step(s, f, cfg)
t = timeit.Timer(lambda: step(s, f, cfg))
num, _ = t.autorange()
print(kernels.BACKEND, min(t.repeat(repeat={repeat}, number=num)) / num)
"""


def time_full_step(backend, n, repeat):
    # a fresh interpreter so the backend is chosen at import, as in real use
    env = dict(os.environ, ERD_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=n, repeat=repeat)],
                         env=env, capture_output=True, text=True, check=True)
    name, secs = out.stdout.split()
    return name, float(secs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="image side length")
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not importable; timing the numpy fallback only",
              file=sys.stderr)
    mods = {b: kernels.load_backend(b) for b in backends}
    rows = []
    for name, fn in kernel_cases(args.size, args.seed).items():
        outs = {b: fn(m) for b, m in mods.items()}
        secs = {b: best_of(lambda m=m: fn(m), args.repeat) for b, m in mods.items()}
        diff = float(np.max(np.abs(np.asarray(outs["python"]) - np.asarray(outs.get(
            "compiled", outs["python"])))))
        rows.append((name, secs["python"], secs.get("compiled", math.nan), diff))
    step_py = time_full_step("python", args.size, args.repeat)[1]
    step_c = time_full_step("compiled", args.size, args.repeat)[1] \
        if "compiled" in backends else math.nan
    rows.append(("full ADMM step", step_py, step_c, math.nan))

    print(f"{args.size}x{args.size}, best of {args.repeat}")
    print(f"{'kernel':<16} {'python ms':>10} {'compiled ms':>12} {'speedup':>8} {'max diff':>9}")
    for name, py, c, diff in rows:
        speed = py / c if c == c else math.nan
        dtxt = "" if diff != diff else f"{diff:.1e}"
        print(f"{name:<16} {py * 1e3:>10.3f} {c * 1e3:>12.3f} {speed:>8.2f} {dtxt:>9}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kernel", "python_s", "compiled_s", "max_abs_diff"])
            w.writerows([n, repr(p), repr(c), repr(d)] for n, p, c, d in rows)
    return 0


if __name__ == "__main__":
    importlib.invalidate_caches()
    sys.exit(main())
