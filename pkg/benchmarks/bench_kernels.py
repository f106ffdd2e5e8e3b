"""Compare the Cython kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 1235] [--bits 60] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from buglens import kernels


def inputs(n, bits, seed=0):
    rng = np.random.default_rng(seed)
    ts = np.sort(rng.integers(1_170_000_000, 1_300_000_000, n)).astype(np.int64)
    # clumped timestamps, as when many programs share an inducing commit
    ts = ts[rng.integers(0, max(n // 40, 1), n)]
    levels = rng.integers(0, 5, n).astype(np.int64)
    vec = rng.integers(0, 2, (n, bits)).astype(np.uint8)
    return ts, levels, vec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1235)
    ap.add_argument("--bits", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    ts, levels, vec = inputs(args.n, args.bits)
    backends = kernels.backends()
    if "cython" not in backends:
        print("extension not built; only the numpy fallback is available")
    ref = None
    print(f"n={args.n} bits={args.bits} best of {args.repeat}")
    print(f"{'backend':8} {'bisect_matrix':>14} {'mismatch':>10} {'fpf_order':>10} {'100 x fpf':>10}")
    for name, mod in sorted(backends.items()):
        d = mod.bisect_matrix(ts) * (args.bits + 1) + mod.mismatch_matrix(levels, vec)
        d = np.ascontiguousarray(d, dtype=np.float64)
        order = mod.fpf_order(d, 0)
        if ref is None:
            ref = order
        assert np.array_equal(order, ref), "backends disagree"

        def best(stmt, number=1):
            return min(timeit.repeat(stmt, number=number, repeat=args.repeat)) / number

        t_b = best(lambda: mod.bisect_matrix(ts))
        t_m = best(lambda: mod.mismatch_matrix(levels, vec))
        t_f = best(lambda: mod.fpf_order(d, 0))
        t_100 = best(lambda: [mod.fpf_order(d, s % args.n) for s in range(100)], 1)
        print(f"{name:8} {t_b * 1e3:12.2f}ms {t_m * 1e3:8.2f}ms {t_f * 1e3:8.2f}ms {t_100:9.2f}s")


if __name__ == "__main__":
    main()
