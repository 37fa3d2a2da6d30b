"""Compare the numba kernels against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--repeat 5]

Sizes mirror the package's real workloads: 400 quadrature nodes at cutoff 40,
the 6561-point heterodyne grid, and operator stacks of five moments.  The
numba timings exclude the first (compiling) call.
"""

import argparse
import time

import numpy as np

from bayesur import _kernels


def _best(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(rng):
    alphas = rng.normal(size=6561) + 1j * rng.normal(size=6561)
    nodes = alphas[:400]
    d = 40
    ops = rng.normal(size=(5, d, d)) + 1j * rng.normal(size=(5, d, d))
    ops = ops + ops.conj().transpose(0, 2, 1)
    vecs = _kernels.numpy_impl.coherent_vectors(nodes, d)
    grid_vecs = _kernels.numpy_impl.coherent_vectors(alphas, d)
    w = rng.random(alphas.size)
    return {
        "coherent_vectors 6561x40": lambda impl: impl.coherent_vectors(alphas, d),
        "quadratic_forms 5x40x40 @ 400": lambda impl: impl.quadratic_forms(ops, vecs),
        "rank_one_sum 6561x40": lambda impl: impl.rank_one_sum(grid_vecs, w),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.numba_impl is None:
        print("numba is not importable; only the numpy path is available")
    impls = [i for i in (_kernels.numpy_impl, _kernels.numba_impl) if i is not None]
    print(f"{'kernel':<34}" + "".join(f"{i.name:>12}" for i in impls) + ("     speedup" if len(impls) == 2 else ""))
    for name, run in workloads(np.random.default_rng(0)).items():
        t = [_best(lambda: run(impl), args.repeat) for impl in impls]
        row = f"{name:<34}" + "".join(f"{v * 1e3:>10.2f}ms" for v in t)
        if len(t) == 2:
            row += f"{t[0] / t[1]:>11.2f}x"
        print(row)


if __name__ == "__main__":
    main()
