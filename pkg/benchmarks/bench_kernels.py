"""Benchmark the compiled kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [n_atoms]

Times the batch gauges and compensated reductions both ways, checks the
backends agree, and reports an end-to-end ball-mass query comparison.
"""

import math
import sys
import time

import numpy as np

sys.path.insert(0, "src")

from normlab._kernels import _numpy_backend as npk  # noqa: E402

try:
    from normlab._kernels import _cy_backend as cyk
except ImportError:
    cyk = None


def timeit(fn, *args, repeat=5):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(n=1_000_000):
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(n, 2))
    w = rng.lognormal(size=n)
    funcs = rng.normal(size=(12, 2))

    cases = [
        ("lp_gauge p=2", lambda b: b.lp_gauge(pts, 2.0)),
        ("lp_gauge p=inf", lambda b: b.lp_gauge(pts, math.inf)),
        ("lp_gauge p=3.5", lambda b: b.lp_gauge(pts, 3.5)),
        ("max_dot m=12", lambda b: b.max_dot(pts, funcs)),
        ("comp_sum", lambda b: b.comp_sum(w)),
        ("comp_dot", lambda b: b.comp_dot(pts[:, 0], w)),
    ]

    print(f"n = {n} atoms")
    print(f"{'kernel':<16} {'numpy':>10} {'cython':>10} {'speedup':>8}  agreement")
    for name, call in cases:
        t_np, r_np = timeit(call, npk)
        if cyk is None:
            print(f"{name:<16} {t_np * 1e3:>8.2f}ms {'-':>10} {'-':>8}")
            continue
        t_cy, r_cy = timeit(call, cyk)
        a = np.asarray(r_np, dtype=np.float64).ravel()
        b = np.asarray(r_cy, dtype=np.float64).ravel()
        err = float(np.max(np.abs(a - b) / (np.abs(a) + 1e-300)))
        print(
            f"{name:<16} {t_np * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms {t_np / t_cy:>7.2f}x"
            f"  max rel diff {err:.1e}"
        )

    # end-to-end: ball masses on a million-atom lattice, both backends
    import importlib
    import os

    for forced, label in ((None, "auto"), ("1", "numpy")):
        if forced is None:
            os.environ.pop("NORMLAB_FORCE_NUMPY", None)
        else:
            os.environ["NORMLAB_FORCE_NUMPY"] = forced
        for mod in list(sys.modules):
            if mod.startswith("normlab"):
                del sys.modules[mod]
        normlab = importlib.import_module("normlab")
        ms = importlib.import_module("normlab.measures")
        norms = importlib.import_module("normlab.norms")
        leb = ms.gen_lebesgue_grid([0, 0, 1, 1], n)
        poly = norms.random_polygon(3)
        t0 = time.perf_counter()
        total = 0.0
        for r in np.linspace(0.05, 0.3, 20):
            total += ms.ball_mass(leb, poly, [0.5, 0.5], r)
        dt = time.perf_counter() - t0
        print(f"ball_mass x20 on the lattice [{label:>5} backend = {normlab.kernel_backend}]: "
              f"{dt * 1e3:.1f}ms (checksum {total:.6f})")
    os.environ.pop("NORMLAB_FORCE_NUMPY", None)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1_000_000)
