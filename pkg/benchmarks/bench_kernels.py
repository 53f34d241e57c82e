"""Compare the compiled kernels with the pure-numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Times three workloads on both backends: a single tableau pivot, sliding
window maxima as used by the monitor, and an end-to-end planning run of the
two-double-integrator example (which pivots through the active backend).
"""

import argparse
import timeit

import numpy as np

from ctstl import _kernels_py, kernels
from ctstl.encode import EncodingOptions
from ctstl.lindyn import LinearSystem
from ctstl.plan import PlanProblem, plan
from ctstl.stl import parse_formula

try:
    from ctstl import _kernels as _kc
except ImportError:  # pragma: no cover
    _kc = None


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_pivot(impl, repeat, shape=(120, 400)):
    rng = np.random.default_rng(0)
    T0 = rng.normal(size=shape)
    T = T0.copy()

    def run():
        T[:] = T0
        impl.pivot(T, 7, 11)
    return _best(run, repeat, 200)


def bench_window(impl, repeat, n=200_000, width=500):
    rng = np.random.default_rng(1)
    v = rng.normal(size=n)
    lo = np.arange(n, dtype=np.intp)
    hi = np.minimum(lo + width, n - 1).astype(np.intp)
    return _best(lambda: impl.window_max(v, lo, hi), repeat, 5)


def bench_plan(impl, repeat):
    A = np.zeros((4, 4))
    A[0, 1] = A[2, 3] = 1.0
    B = np.zeros((4, 2))
    B[1, 0] = B[3, 1] = 1.0
    f = parse_formula("F[0.1,0.6](x1 <= -0.5 & x3 >= 0.5) & F[0.7,1](x1 >= 1 & x3 >= 1) "
                      "& G[0,1](x1 >= 0 | x3 >= 0)", 4)
    opts = EncodingOptions(u_lower=[-40.0, -40.0], u_upper=[40.0, 40.0], ecbf_gains=(30.0, 30.0))
    prob = PlanProblem(LinearSystem(A, B), [1.0, 0.0, -0.5, 0.0], f, opts)
    saved = kernels.pivot
    kernels.pivot = impl.pivot
    try:
        return _best(lambda: plan(prob), repeat, 1)
    finally:
        kernels.pivot = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = [("python", _kernels_py)] + ([("cython", _kc)] if _kc is not None else [])
    if _kc is None:
        print("compiled extension not available; timing the fallback only")
    rows = [("pivot 120x400", bench_pivot), ("window_max n=2e5 w=500", bench_window),
            ("plan two-double-integrator", bench_plan)]
    print(f"{'workload':<30}" + "".join(f"{name:>14}" for name, _ in impls) + f"{'speedup':>10}")
    for label, fn in rows:
        times = [fn(impl, args.repeat) for _, impl in impls]
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{label:<30}" + "".join(f"{t * 1e3:>11.3f} ms" for t in times) + speed)


if __name__ == "__main__":
    main()
