"""Time the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 5]

Both backends are imported side by side from ``lpdens._kernels``; the
``LPDENS_DISABLE_NUMBA`` flag only changes which one the library uses.
"""
import argparse
import time

import numpy as np

from lpdens import _kernels, polybasis


def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _kernels.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(args.seed)
    U = rng.random((args.n, 2)) * 0.8
    inside = U[:, 1] <= U[:, 0]
    exps = polybasis.enumerate(2, 5).exps
    hs = np.linspace(0.01, 0.6, 60)
    weight = rng.standard_normal(len(exps))
    A = rng.standard_normal((28, 28))
    A = A @ A.T + 1e-3 * np.eye(28)
    x = rng.standard_normal(10 * args.n)

    cases = {
        "window_moments (60 bandwidths, degree 5)": lambda impl: impl.window_moments(U, inside, hs, exps),
        "kernel_terms (degree 5)": lambda impl: impl.kernel_terms(U, inside, 0.3, exps, weight),
        "monomials (degree 5)": lambda impl: impl.monomials(U, exps),
        "jacobi_eigenvalues (28 x 28)": lambda impl: impl.jacobi_eigenvalues(A, 100),
        "compensated_sum": lambda impl: impl.compensated_sum(x),
    }
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<42}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, call in cases.items():
        t_np = best_of(lambda: call(_kernels.numpy_impl), args.repeat)
        t_nb = best_of(lambda: call(_kernels.numba_impl), args.repeat)
        print(f"{name:<42}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
