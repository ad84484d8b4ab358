import os
import subprocess
import sys

import numpy as np
import pytest

from inrpatch import kernels
from inrpatch.kernels import _fallback

try:
    from inrpatch.kernels import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if _ckernels is not None:
        assert kernels.BACKEND == "cython"


def test_env_forces_fallback():
    env = dict(os.environ, INRPATCH_KERNELS="python")
    out = subprocess.run([sys.executable, "-c", "from inrpatch import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("k, stride, pad", [(4, 2, 1), (3, 1, 1), (2, 2, 0)])
def test_fallback_im2col_matches_loop(k, stride, pad):
    x = np.random.default_rng(0).standard_normal((2, 3, 8, 8)).astype(np.float32)
    cols = _fallback.im2col(x, k, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (8 + 2 * pad - k) // stride + 1
    ref = np.empty((2, 3 * k * k, oh * oh), np.float32)
    for i in range(oh):
        for j in range(oh):
            patch = xp[:, :, i * stride:i * stride + k, j * stride:j * stride + k]
            ref[:, :, i * oh + j] = patch.reshape(2, -1)
    assert np.array_equal(cols, ref)


def test_col2im_is_adjoint_of_im2col():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
    cols = _fallback.im2col(x, 4, 2, 1)
    y = rng.standard_normal(cols.shape).astype(np.float32)
    back = _fallback.col2im(y, x.shape, 4, 2, 1)
    assert np.isclose(np.sum(cols.astype(np.float64) * y), np.sum(x.astype(np.float64) * back), rtol=1e-5)


@needs_ext
@pytest.mark.parametrize("k, stride, pad", [(4, 2, 1), (3, 1, 1), (2, 2, 0)])
def test_conv_kernels_agree(k, stride, pad):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 4, 16, 16)).astype(np.float32)
    a = _fallback.im2col(x, k, stride, pad)
    b = _ckernels.im2col(x, k, stride, pad)
    assert np.array_equal(a, b)
    g = rng.standard_normal(a.shape).astype(np.float32)
    assert np.array_equal(_fallback.col2im(g, x.shape, k, stride, pad),
                          _ckernels.col2im(g, x.shape, k, stride, pad))


@needs_ext
def test_leaky_relu_agree():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((64, 128)).astype(np.float32)
    g = rng.standard_normal((64, 128)).astype(np.float32)
    x[0, :4] = [0.0, -0.0, 1e-30, -1e-30]
    assert np.array_equal(_fallback.leaky_relu(x, 0.2), _ckernels.leaky_relu(x, 0.2))
    assert np.array_equal(_fallback.leaky_relu_grad(x, g, 0.2), _ckernels.leaky_relu_grad(x, g, 0.2))
    # non-contiguous input
    xt = x.T
    assert np.array_equal(_fallback.leaky_relu(xt, 0.2), _ckernels.leaky_relu(xt, 0.2))


@pytest.mark.parametrize("impl", ["fallback", "compiled"])
def test_jacobi(impl):
    mod = _fallback if impl == "fallback" else _ckernels
    if mod is None:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(4)
    a = rng.standard_normal((12, 12))
    a = a @ a.T
    w, v = mod.jacobi_eigh(a)
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(a), atol=1e-9)
    assert np.allclose(v.T @ v, np.eye(12), atol=1e-12)
    assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-9)


@needs_ext
def test_jacobi_backends_agree():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((12, 12))
    a = a + a.T
    wa, va = _fallback.jacobi_eigh(a)
    wb, vb = _ckernels.jacobi_eigh(a)
    assert np.allclose(wa, wb, atol=1e-12) and np.allclose(va, vb, atol=1e-12)


def test_jacobi_diagonal_and_large_entries():
    w, v = kernels.jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
    assert w.tolist() == [3.0, 1.0, 2.0]
    big = np.array([[1e200, 1.0], [1.0, 1e200]])
    w, _ = kernels.jacobi_eigh(big)
    assert np.isfinite(w).all()
