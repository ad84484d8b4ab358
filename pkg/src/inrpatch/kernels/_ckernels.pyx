# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback``.

Loop orders follow the numpy versions so conv results agree bitwise.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def im2col(const float[:, :, :, ::1] x, int k, int stride, int pad):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t OH = (H + 2 * pad - k) // stride + 1
    cdef Py_ssize_t OW = (W + 2 * pad - k) // stride + 1
    out = np.zeros((B, C * k * k, OH * OW), dtype=np.float32)
    cdef float[:, :, ::1] o = out
    cdef Py_ssize_t b, c, i, j, oy, ox, row, iy, ix
    with nogil:
        for b in range(B):
            for c in range(C):
                for i in range(k):
                    for j in range(k):
                        row = (c * k + i) * k + j
                        for oy in range(OH):
                            iy = oy * stride + i - pad
                            if iy < 0 or iy >= H:
                                continue
                            for ox in range(OW):
                                ix = ox * stride + j - pad
                                if ix < 0 or ix >= W:
                                    continue
                                o[b, row, oy * OW + ox] = x[b, c, iy, ix]
    return out


def col2im(cols, shape, int k, int stride, int pad):
    cdef Py_ssize_t B = shape[0], C = shape[1], H = shape[2], W = shape[3]
    cdef Py_ssize_t OH = (H + 2 * pad - k) // stride + 1
    cdef Py_ssize_t OW = (W + 2 * pad - k) // stride + 1
    cdef const float[:, :, ::1] cv = np.ascontiguousarray(
        cols, dtype=np.float32).reshape(B, C * k * k, OH * OW)
    out = np.zeros((B, C, H, W), dtype=np.float32)
    cdef float[:, :, :, ::1] o = out
    cdef Py_ssize_t b, c, i, j, oy, ox, row, iy, ix
    with nogil:
        for b in range(B):
            for c in range(C):
                for i in range(k):
                    for j in range(k):
                        row = (c * k + i) * k + j
                        for oy in range(OH):
                            iy = oy * stride + i - pad
                            if iy < 0 or iy >= H:
                                continue
                            for ox in range(OW):
                                ix = ox * stride + j - pad
                                if ix < 0 or ix >= W:
                                    continue
                                o[b, c, iy, ix] += cv[b, row, oy * OW + ox]
    return out


def jacobi_eigh(a_in, double tol=1e-12, int max_sweeps=100):
    a_np = np.array(a_in, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = a_np.shape[0]
    v_np = np.eye(n)
    cdef double[:, ::1] a = a_np
    cdef double[:, ::1] v = v_np
    cdef Py_ssize_t p, q, r, sweep
    cdef double apq, theta, t, c, s, x, y, off, total, scale
    total = 0.0
    for p in range(n):
        for q in range(n):
            total += a[p, q] * a[p, q]
    scale = sqrt(total)
    if scale == 0.0:
        scale = 1.0
    with nogil:
        for sweep in range(max_sweeps):
            off = 0.0
            for p in range(n):
                for q in range(n):
                    if p != q:
                        off += a[p, q] * a[p, q]
            if sqrt(off) <= tol * scale:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    elif theta >= 0:
                        t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    else:
                        t = -1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for r in range(n):
                        x = a[r, p]
                        y = a[r, q]
                        a[r, p] = c * x - s * y
                        a[r, q] = s * x + c * y
                    for r in range(n):
                        x = a[p, r]
                        y = a[q, r]
                        a[p, r] = c * x - s * y
                        a[q, r] = s * x + c * y
                    for r in range(n):
                        x = v[r, p]
                        y = v[r, q]
                        v[r, p] = c * x - s * y
                        v[r, q] = s * x + c * y
    return np.diag(a_np).copy(), v_np


def leaky_relu(x_in, float slope):
    x_np = np.ascontiguousarray(x_in, dtype=np.float32)
    out = np.empty_like(x_np)
    cdef float[::1] xv = x_np.reshape(-1)
    cdef float[::1] ov = out.reshape(-1)
    cdef Py_ssize_t n = xv.shape[0]
    if n:
        _lrelu(&xv[0], &ov[0], n, slope)
    return out


def leaky_relu_grad(x_in, g_in, float slope):
    x_np = np.ascontiguousarray(x_in, dtype=np.float32)
    g_np = np.ascontiguousarray(g_in, dtype=np.float32)
    out = np.empty_like(g_np)
    cdef float[::1] xv = x_np.reshape(-1)
    cdef float[::1] gv = g_np.reshape(-1)
    cdef float[::1] ov = out.reshape(-1)
    cdef Py_ssize_t n = xv.shape[0]
    if n:
        _lrelu_grad(&xv[0], &gv[0], &ov[0], n, slope)
    return out


cdef void _lrelu(const float* x, float* o, Py_ssize_t n, float slope) noexcept nogil:
    cdef Py_ssize_t i
    cdef float v, w
    for i in range(n):
        v = x[i]
        w = v * slope
        o[i] = v if v > w else w


cdef void _lrelu_grad(const float* x, const float* g, float* o, Py_ssize_t n,
                      float slope) noexcept nogil:
    cdef Py_ssize_t i
    cdef float f
    for i in range(n):
        f = 1.0 if x[i] > 0 else slope
        o[i] = g[i] * f
