"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--reps 5]

Each kernel is checked for agreement first; the numba timing excludes the
one-off JIT compile.
"""

import argparse
import time

import numpy as np

from spectre._kernels import numba_kernels, numpy_kernels


def best_of(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng):
    X = rng.standard_normal((20000, 16))
    A = rng.standard_normal((16, 16))
    A = A @ A.T
    Yr = rng.standard_normal((2000, 64))
    V = rng.standard_normal((64, 64))
    a = np.abs(rng.standard_normal(20000)) * 3
    P = np.vstack([rng.standard_normal((4000, 10)), rng.standard_normal((1000, 10)) + 4])
    return [
        ("row_quadforms 20000x16", "row_quadforms", (X, A)),
        ("kr_apply m=2000 k=64", "kr_apply", (Yr, V)),
        ("cov_tail_pick n=20000", "cov_tail_pick", (a, 0.05, 3.0)),
        ("mean_tail_pick n=20000", "mean_tail_pick", (a, 0.5, 0.05, 10.0, 1.0)),
        ("lloyd_2means 5000x10", "lloyd_2means", (P, P[0].copy(), P[-1].copy(), 100)),
    ]


def agree(x, y):
    if isinstance(x, tuple):
        return all(agree(a, b) for a, b in zip(x, y))
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return np.allclose(x, y, rtol=1e-9, atol=1e-9, equal_nan=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if numba_kernels is None:
        raise SystemExit("numba kernels unavailable (numba missing or SPECTRE_DISABLE_NUMBA set)")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<26}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}  agree")
    for label, name, inputs in cases(rng):
        f_np, f_nb = getattr(numpy_kernels, name), getattr(numba_kernels, name)
        ok = agree(f_np(*inputs), f_nb(*inputs))  # also warms up the JIT
        t_np = best_of(lambda: f_np(*inputs), args.reps)
        t_nb = best_of(lambda: f_nb(*inputs), args.reps)
        print(f"{label:<26}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>10.2f}  {ok}")


if __name__ == "__main__":
    main()
