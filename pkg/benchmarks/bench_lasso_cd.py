"""Benchmark the coordinate-descent kernel: compiled extension vs numpy fallback.

Usage: python benchmarks/bench_lasso_cd.py [--repeats 5]

Times a full cross-validated multi-target lasso fit through each backend and
the raw kernel on a single column, then prints a table with the speedup.
"""
import argparse
import time

import numpy as np

from iatc._cd_py import lasso_cd as lasso_py

try:
    from iatc._cd_fast import lasso_cd as lasso_fast
except ImportError:
    lasso_fast = None


def make_problem(seed=0, n=400, p=200, q=8, nonzero=10, noise=0.05):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    W = np.zeros((p, q))
    for j in range(q):
        idx = rng.choice(p, size=nonzero, replace=False)
        W[idx, j] = rng.normal(size=nonzero)
    Y = X @ W + noise * rng.normal(size=(n, q))
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    return Xc, Yc


def time_kernel(kernel, Xc, Yc, alpha, repeats):
    n = Xc.shape[0]
    Xf = np.asfortranarray(Xc)
    best = np.inf
    sweeps = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        for j in range(Yc.shape[1]):
            y = np.ascontiguousarray(Yc[:, j])
            w = np.zeros(Xc.shape[1])
            n_sweeps, gap, ok = kernel(Xf, y, alpha * n, w, False, 10_000,
                                       1e-10 * float(y @ y))
            assert ok, f"kernel did not converge (gap {gap:.3e})"
            sweeps = max(sweeps, n_sweeps)
        best = min(best, time.perf_counter() - t0)
    return best, sweeps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--alpha", type=float, default=0.02)
    args = parser.parse_args()

    Xc, Yc = make_problem()
    n, p = Xc.shape
    print(f"problem: {n} samples x {p} features x {Yc.shape[1]} targets, "
          f"alpha={args.alpha}, best of {args.repeats} repeats\n")

    rows = []
    t_py, sweeps = time_kernel(lasso_py, Xc, Yc, args.alpha, args.repeats)
    rows.append(("python", t_py, sweeps))
    if lasso_fast is not None:
        t_fast, sweeps_f = time_kernel(lasso_fast, Xc, Yc, args.alpha, args.repeats)
        rows.append(("compiled", t_fast, sweeps_f))
        # both backends must land on the same solution
        wa = np.zeros(p)
        wb = np.zeros(p)
        y = np.ascontiguousarray(Yc[:, 0])
        lasso_py(Xc, y, args.alpha * n, wa, False, 10_000, 1e-10 * float(y @ y))
        lasso_fast(np.asfortranarray(Xc), y, args.alpha * n, wb, False, 10_000,
                   1e-10 * float(y @ y))
        print(f"solution agreement: max |w_py - w_compiled| = {np.abs(wa - wb).max():.2e}")
    else:
        print("compiled kernel not available; showing the fallback only")

    print(f"\n{'backend':<10} {'seconds':>10} {'max sweeps':>12}")
    for name, secs, sw in rows:
        print(f"{name:<10} {secs:>10.4f} {sw:>12}")
    if lasso_fast is not None:
        print(f"\nspeedup: {t_py / t_fast:.1f}x")


if __name__ == "__main__":
    main()
