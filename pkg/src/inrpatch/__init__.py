"""Multi-stage patch-based training for coordinate-MLP (INR) GANs."""
import os as _os

_threads = _os.environ.get("INRPATCH_THREADS")
if _threads:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"
