"""Compiled kernels vs the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Each kernel is timed on the same inputs under both backends; the best of
``--repeat`` runs is reported together with the speedup and a check that the
two answers agree.
"""
import argparse
import time

import numpy as np

from rfimlab import _pykernels

try:
    from rfimlab import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def _best(fn, args, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(quick):
    rng = np.random.default_rng(0)
    L = 16 if quick else 32
    side = 2 * L + 1
    terminal = rng.normal(0, 1, size=(side, side)) * 2.0
    terminal[0, :] += 8
    terminal[-1, :] -= 8
    yield "grid_min_cut", f"{side}x{side} grid", (terminal, 2.0), lambda a, b: abs(a[1] - b[1]) < 1e-9

    n = 200 if quick else 400
    mask = (rng.random((n, n)) < 0.6).astype(np.uint8)
    src = np.zeros_like(mask)
    src[0, :] = mask[0, :]
    yield "grid_bfs", f"{n}x{n} mask", (mask, src), lambda a, b: np.array_equal(np.asarray(a[0]), np.asarray(b[0]))

    steps = rng.choice([-1, 1], size=(400, 2)) * (rng.random((400, 1)) < 0.5)
    pts = np.cumsum(steps, axis=0) / 16.0
    m = 500 if quick else 2000
    a = pts[rng.integers(len(pts), size=m)] + rng.uniform(-0.2, 0.2, size=(m, 2))
    b = a + rng.uniform(-0.8, 0.8, size=(m, 2))
    r = rng.uniform(0.02, 0.3, size=m)
    yield ("cylinders_crossed", f"{len(pts)} points, {m} cylinders", (pts, a, b, r, 1e-9),
           lambda x, y: np.array_equal(np.asarray(x), np.asarray(y)))

    k = 60 if quick else 150
    P = rng.uniform(-2, 2, size=(k, 2))
    d = np.linalg.norm(P[:, None] - P[None], axis=-1)
    K = np.maximum(d, 0.1) ** -1.5
    yield ("simplex_exchange", f"{k} atoms", (K, np.full(k, 1.0 / k), 1e-10, 200000),
           lambda x, y: abs(x[1] - y[1]) <= 1e-9 * abs(y[1]))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<18} {'input':<28} {'compiled s':>11} {'python s':>10} {'speedup':>8}  agree")
    for name, label, inputs, agree in _cases(args.quick):
        tp, outp = _best(getattr(_pykernels, name), inputs, args.repeat)
        if compiled is None:
            print(f"{name:<18} {label:<28} {'-':>11} {tp:10.4f} {'-':>8}  -")
            continue
        tc, outc = _best(getattr(compiled, name), inputs, args.repeat)
        print(f"{name:<18} {label:<28} {tc:11.5f} {tp:10.4f} {tp / tc:7.1f}x  {agree(outc, outp)}")


if __name__ == "__main__":
    main()
