"""Pure numpy implementations of the hot kernels.

These are the reference versions. The compiled module ``_ckernels`` mirrors
each function's signature and, for the conv kernels, its summation order.
"""
import math

import numpy as np


def im2col(x, k, stride, pad):
    """Unfold ``x`` (B, C, H, W) into columns (B, C*k*k, OH*OW)."""
    B, C, H, W = x.shape
    OH = (H + 2 * pad - k) // stride + 1
    OW = (W + 2 * pad - k) // stride + 1
    if pad:
        xp = np.zeros((B, C, H + 2 * pad, W + 2 * pad), dtype=x.dtype)
        xp[:, :, pad:pad + H, pad:pad + W] = x
    else:
        xp = x
    cols = np.empty((B, C, k, k, OH, OW), dtype=x.dtype)
    for i in range(k):
        i_end = i + stride * OH
        for j in range(k):
            j_end = j + stride * OW
            cols[:, :, i, j] = xp[:, :, i:i_end:stride, j:j_end:stride]
    return cols.reshape(B, C * k * k, OH * OW)


def col2im(cols, shape, k, stride, pad):
    """Adjoint of :func:`im2col`; overlapping contributions are summed in (i, j) order."""
    B, C, H, W = shape
    OH = (H + 2 * pad - k) // stride + 1
    OW = (W + 2 * pad - k) // stride + 1
    cols = cols.reshape(B, C, k, k, OH, OW)
    xp = np.zeros((B, C, H + 2 * pad, W + 2 * pad), dtype=cols.dtype)
    for i in range(k):
        i_end = i + stride * OH
        for j in range(k):
            j_end = j + stride * OW
            xp[:, :, i:i_end:stride, j:j_end:stride] += cols[:, :, i, j]
    return np.ascontiguousarray(xp[:, :, pad:pad + H, pad:pad + W])


def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvectors in columns, in the
    order the rotations leave them (unsorted). Works in float64.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.sqrt(np.sum(a * a)) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                theta = (float(a[q, q]) - float(a[p, p])) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def leaky_relu(x, slope):
    """max(x, slope*x) for 0 <= slope <= 1."""
    return np.maximum(x, x * x.dtype.type(slope))


def leaky_relu_grad(x, g, slope):
    """Gradient of :func:`leaky_relu` given upstream ``g``."""
    pos = x > 0
    return g * (pos + (~pos) * g.dtype.type(slope))
