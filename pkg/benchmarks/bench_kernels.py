"""Compiled kernels vs the numpy fallback on training-sized inputs.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel is timed with timeit (best of ``repeat`` runs) for both
backends; outputs are checked to agree before timing.
"""
import argparse
import timeit

import numpy as np

from inrpatch.kernels import _fallback

try:
    from inrpatch.kernels import _ckernels
except ImportError:
    _ckernels = None


def cases():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 32, 16, 16)).astype(np.float32)
    cols = _fallback.im2col(x, 4, 2, 1)
    act = rng.standard_normal((8, 256, 128)).astype(np.float32)
    g = rng.standard_normal(act.shape).astype(np.float32)
    a = rng.standard_normal((12, 12))
    sym = a @ a.T
    return {
        "im2col 8x32x16x16 k4 s2": (lambda m: m.im2col(x, 4, 2, 1)),
        "col2im 8x32x16x16 k4 s2": (lambda m: m.col2im(cols, x.shape, 4, 2, 1)),
        "leaky_relu 8x256x128": (lambda m: m.leaky_relu(act, 0.2)),
        "leaky_relu_grad 8x256x128": (lambda m: m.leaky_relu_grad(act, g, 0.2)),
        "jacobi_eigh 12x12": (lambda m: m.jacobi_eigh(sym)),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return np.allclose(a, b, rtol=1e-5, atol=1e-6)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the fallback is available")
    print(f"{'kernel':<28} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for name, fn in cases().items():
        row = []
        for mod in (_fallback, _ckernels):
            if mod is None:
                row.append(float("nan"))
                continue
            t = timeit.Timer(lambda: fn(mod))
            n, _ = t.autorange()
            row.append(min(t.repeat(args.repeat, n)) / n * 1e6)
        if _ckernels is not None and not _same(fn(_fallback), fn(_ckernels)):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<28} {row[0]:>10.1f} {row[1]:>10.1f} {row[0] / row[1]:>7.2f}x")


if __name__ == "__main__":
    main()
