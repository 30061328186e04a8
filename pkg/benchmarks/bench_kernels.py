"""Compiled versus pure-Python Jacobi kernels on the workloads that dominate runtime.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 3]

Batched 4x4 spectra drive the superadditivity search and the additivity scan;
single small eigensolves drive entropies and divergences everywhere else.
numpy's LAPACK path is shown for reference.
"""

import argparse
import timeit

import numpy as np

from qcapacity import _jacobi_py

try:
    from qcapacity import _jacobi
except ImportError:  # extension not built
    _jacobi = None


def random_hermitian(rng, n, d):
    a = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def bench(label, fn, repeat):
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"{label:<34s} {best * 1e3:10.2f} ms")
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    for d, n in ((4, args.n), (8, args.n // 10)):
        hs = random_hermitian(rng, n, d)
        print(f"batched eigenvalues, {n} matrices of size {d}x{d}")
        ref = np.linalg.eigvalsh(hs)
        t_py = bench("  pure python (vectorized numpy)", lambda: _jacobi_py.eigvalsh_batch(hs), args.repeat)
        if _jacobi is not None:
            t_cy = bench("  cython", lambda: _jacobi.eigvalsh_batch(hs), args.repeat)
            err = np.max(np.abs(_jacobi.eigvalsh_batch(hs) - ref))
            print(f"  speedup {t_py / t_cy:5.2f}x   max |cython - lapack| = {err:.1e}")
        bench("  numpy.linalg.eigvalsh", lambda: np.linalg.eigvalsh(hs), args.repeat)

    h = random_hermitian(rng, 1, 4)[0]
    reps = 2000
    print(f"single 4x4 eigh with vectors, {reps} calls")

    def loop(mod):
        return lambda: [mod.eigh(h) for _ in range(reps)]

    t_py = bench("  pure python", loop(_jacobi_py), args.repeat)
    if _jacobi is not None:
        t_cy = bench("  cython", loop(_jacobi), args.repeat)
        print(f"  speedup {t_py / t_cy:5.2f}x")


if __name__ == "__main__":
    main()
