"""Compare the compiled and numpy kernels on representative sizes.

Run with ``python3 benchmarks/bench_kernels.py``.  Both backends are imported
directly, so the comparison does not depend on ``GRAPHINDEX_PURE_PYTHON``.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np
import scipy.linalg as sla

from graphindex import _pykernels

try:
    from graphindex import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def banded_case(n: int, bw: int, seed: int = 0):
    """Lower band storage of a symmetric pencil ``A - shift M`` (``M`` tridiagonal)."""
    rng = np.random.default_rng(seed)
    a = np.zeros((bw + 1, n))
    a[0] = rng.uniform(-1.0, 3.0, n)
    for k in range(1, bw + 1):
        a[k, : n - k] = 0.3 * rng.standard_normal(n - k)
    m = np.zeros((bw + 1, n))
    m[0] = 4.0
    m[1, : n - 1] = 1.0
    return a, m


def chain_case(n_steps: int, dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    gens = 0.05 * rng.standard_normal((n_steps, dim, dim))
    return np.stack([sla.expm(g) for g in gens])


def bench(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<34}{'backend':<9}{'seconds':>12}{'speedup':>10}")
    cases = []
    for n, bw in ((2000, 4), (20000, 8), (5000, 40)):
        a, m = banded_case(n, bw)
        cases.append((f"banded_ldl_inertia n={n} bw={bw}",
                      lambda mod, a=a, m=m: mod.banded_ldl_inertia(a, m, 0.7, 1e-14)))
    for steps, dim in ((2000, 4), (2000, 12)):
        s = chain_case(steps, dim)
        cases.append((f"chain_products steps={steps} 2d={dim}",
                      lambda mod, s=s: mod.chain_products(s)))
    for name, call in cases:
        results = {label: call(mod) for label, mod in backends}
        ref = results["python"]
        for label, out in results.items():
            same = (out[:3] == ref[:3]) if isinstance(ref, tuple) else np.allclose(out, ref)
            if not same:
                raise SystemExit(f"{name}: backends disagree")
        base = None
        for label, mod in backends:
            t = bench(lambda: call(mod), args.repeat)
            base = t if base is None else base
            print(f"{name:<34}{label:<9}{t:>12.5f}{base / t:>9.1f}x")
    if _ckernels is None:
        print("compiled extension not available; only the numpy backend was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
