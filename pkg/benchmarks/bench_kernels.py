"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--n 4096] [--dimension 30]

Both backends are imported directly, so the comparison does not depend on
``FUNCAR_PURE_PYTHON``. The recursion is the per-replication hot loop of the
rate experiment; the design matrix dominates the sparse regime.
"""
import argparse
import timeit

import numpy as np

from funcar import _pykernels
from funcar.hilbert import BasisSpec

try:
    from funcar import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    number, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=4096, help="path length")
    ap.add_argument("--dimension", type=int, default=30)
    ap.add_argument("--m", type=int, default=20, help="design points per curve")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    J = args.dimension
    rho = rng.standard_normal((J, J))
    rho *= 0.8 / np.abs(np.linalg.eigvals(rho)).max()
    x0 = rng.standard_normal(J)
    z = rng.standard_normal((args.n - 1, J))
    basis = BasisSpec(J, 2.0)
    u = rng.uniform(0, 2 * np.pi, args.n * args.m)

    cases = {
        f"ar_recursion  n={args.n} J={J}": lambda k: (lambda: k.ar_recursion(rho, x0, z)),
        f"fourier_design N={u.size} J={J}": lambda k: (lambda: k.fourier_design(u, J, basis.weights)),
    }
    if _ckernels is None:
        print("compiled extension not built; timing the numpy backend only")
    print(f"{'kernel':36s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, make in cases.items():
        t_py = _time(make(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:36s} {1e3 * t_py:12.3f} {'-':>12s} {'-':>8s}")
            continue
        np.testing.assert_allclose(make(_ckernels)(), make(_pykernels)(), rtol=1e-12, atol=1e-12)
        t_c = _time(make(_ckernels), args.repeat)
        print(f"{name:36s} {1e3 * t_py:12.3f} {1e3 * t_c:12.3f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
