"""Time IMP behavior sampling with the numba kernel, the interpreted kernel and the reference.

    python3 benchmarks/bench_kernels.py [--rows N] [--repeat K]
"""

import argparse
import itertools
import time

from weirdc import imp, kernels
from weirdc.corpus import read
from weirdc.gen import ImpGen


def programs():
    j = imp.parse_imp(read("dop-J.imp"))
    yield "dop-J", j.body, j.vars
    g = ImpGen(3)
    for i in range(3):
        yield f"random{i}", g.whole(4), ("x", "y")


def grid_for(names, rows):
    dom = [False, True] + list(range(8))
    return list(itertools.islice(itertools.cycle(itertools.product(dom, repeat=len(names))), rows))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--budget", type=int, default=2000)
    args = ap.parse_args()
    backends = ["reference", "python"] + (["jit"] if kernels.HAVE_NUMBA else [])
    if kernels.HAVE_NUMBA:
        # warm the JIT so compilation time is not charged to the first program
        kernels.run_imp_batch(imp.parse_imp("(output x)"), ("x",), [(1,)], 10, backend="jit")
    print(f"{'program':10} {'backend':10} {'rows':>6} {'best s':>8} {'rows/s':>10}")
    for name, cmd, names in programs():
        grid = grid_for(names, args.rows)
        ref = None
        for b in backends:
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                out = kernels.run_imp_batch(cmd, names, grid, args.budget, backend=b)
                best = min(best, time.perf_counter() - t0)
            if ref is None:
                ref = out
            assert out == ref, f"{b} disagrees with the reference on {name}"
            print(f"{name:10} {b:10} {len(grid):6d} {best:8.3f} {len(grid) / best:10.0f}")


if __name__ == "__main__":
    main()
