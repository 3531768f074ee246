"""Time the numba and numpy sparse kernels on random bipartite graphs.

    python3 benchmarks/bench_kernels.py [--edges 10000 100000] [--dim 64] [--repeat 20]

Prints the median wall time per call and the numpy/numba speed ratio.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from selfgnn._accel import numba_kernels, numpy_kernels


def random_csr(n_rows: int, n_cols: int, nnz: int, rng: np.random.Generator):
    flat = np.sort(rng.choice(n_rows * n_cols, size=nnz, replace=False))
    rows, cols = np.divmod(flat, n_cols)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
    return indptr, cols.astype(np.int64), rng.random(nnz)


def median_time(fn, repeat: int) -> float:
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench(nnz: int, dim: int, repeat: int, rng) -> list[tuple[str, float, float]]:
    n_rows = n_cols = max(64, int(np.sqrt(nnz * 20)))
    indptr, indices, values = random_csr(n_rows, n_cols, nnz, rng)
    dense = rng.standard_normal((n_cols, dim))
    index = rng.integers(0, n_rows, size=nnz)
    src = rng.standard_normal((nnz, dim))
    cases = {
        "csr_spmm": lambda k: k.csr_spmm(indptr, indices, values, dense, n_rows),
        "scatter_add_rows": lambda k: k.scatter_add_rows(n_rows, index, src),
        "csr_transpose": lambda k: k.csr_transpose(indptr, indices, values, n_cols),
    }
    rows = []
    for name, call in cases.items():
        t_np = median_time(lambda: call(numpy_kernels), repeat)
        t_nb = median_time(lambda: call(numba_kernels), repeat)
        rows.append((name, t_np, t_nb))
    return rows


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--edges", type=int, nargs="+", default=[10_000, 100_000])
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if numba_kernels is None:
        raise SystemExit("numba is not installed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<18} {'edges':>8} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for nnz in args.edges:
        for name, t_np, t_nb in bench(nnz, args.dim, args.repeat, rng):
            print(f"{name:<18} {nnz:>8} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
