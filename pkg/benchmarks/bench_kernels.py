"""Time the compiled kernels against the numpy/scipy fallback.

    python benchmarks/bench_kernels.py [--depth 9] [--queries 100000] [--repeat 3]

Both backends answer the same queries on the same Koch cloud; the script
checks that the answers agree before reporting timings.
"""

import argparse
import math
import time

import numpy as np

from hardylab import geometry
from hardylab.kernels import available_backends, load_backend


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=9)
    ap.add_argument("--queries", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    S = geometry.build_koch_family(math.pi / 3, args.depth)
    D = geometry.build_snowflake_domain(math.pi / 3, min(args.depth, 7))
    rng = np.random.default_rng(args.seed)
    q = rng.uniform([-0.2, -0.2], [1.2, 0.5], size=(args.queries, 2))
    boxes = S.points[rng.integers(len(S.points), size=args.queries // 10)]
    riesz_q = rng.uniform([0.3, -0.05], [0.7, 0.3], size=(2000, 2))
    poly_q = rng.uniform(-1, 1, size=(args.queries, 2))

    cases = {
        "build": lambda m: m.PointTree(S.points),
        "nearest": lambda m, T: T.nearest(q),
        "box_sum": lambda m, T: T.box_sum(boxes, 0.01, S.weights),
        "riesz_sum": lambda m, T: T.riesz_sum(riesz_q, 0.05, 1.1, S.weights),
        "polygon": lambda m, T: m.PolygonIndex(D.vertices).contains(poly_q),
    }
    backends = available_backends()
    print(f"cloud: Koch depth {args.depth}, {len(S.points)} points; backends: {', '.join(backends)}")
    results = {}
    for name in backends:
        m = load_backend(name)
        T = m.PointTree(S.points)
        for case, fn in cases.items():
            call = (lambda fn=fn, m=m: fn(m)) if case == "build" else (lambda fn=fn, m=m, T=T: fn(m, T))
            results[name, case] = best_of(call, args.repeat)

    print(f"{'kernel':<10}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for case in cases:
        row = f"{case:<10}" + "".join(f"{results[b, case][0] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) > 1:
            row += f"{results['python', case][0] / results['cython', case][0]:>11.1f}x"
            a, b = results["cython", case][1], results["python", case][1]
            if case != "build" and not _agree(a, b):
                row += "  MISMATCH"
        print(row)


def _agree(a, b):
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype == bool or np.issubdtype(a.dtype, np.integer):
        return np.array_equal(a, b)
    return np.allclose(a, b, rtol=1e-9, atol=1e-12)


if __name__ == "__main__":
    main()
