"""Hot kernels: the compiled extension when it is built, numpy otherwise.

Set ``INRPATCH_KERNELS=python`` to force the numpy versions.
"""
import os

from . import _fallback

BACKEND = "python"
if os.environ.get("INRPATCH_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

im2col = _impl.im2col
col2im = _impl.col2im
jacobi_eigh = _impl.jacobi_eigh
leaky_relu = _impl.leaky_relu
leaky_relu_grad = _impl.leaky_relu_grad

__all__ = ["BACKEND", "im2col", "col2im", "jacobi_eigh", "leaky_relu", "leaky_relu_grad"]
