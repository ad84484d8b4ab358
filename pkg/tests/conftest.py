import numpy as np
import pytest

from inrpatch import autodiff as ad


def gradcheck(fn, arrays, eps=1e-3, seed=0, reference=None):
    """Max relative error between backward and central differences.

    ``fn`` maps a list of Tensors to an output Tensor. The scalar objective is
    sum(out * r) for a fixed random r; it is evaluated in float64 from the
    float32 output so only the op's own rounding enters the differences.
    ``reference``, if given, maps float64 arrays to the same output computed
    independently in float64 and is used for the differences instead; this
    keeps float32 forward rounding out of checks on deep compositions.
    Relative error is max|fd - an| / max(max|fd|, max|an|), per input.
    """
    arrays = [np.asarray(a, dtype=np.float32) for a in arrays]
    out0 = fn([ad.const(a) for a in arrays])
    r = np.random.default_rng(seed).standard_normal(out0.shape).astype(np.float32)

    def objective(arrs):
        if reference is not None:
            return float(np.sum(reference([a.astype(np.float64) for a in arrs]) * r))
        with ad.no_grad():
            out = fn([ad.const(a) for a in arrs])
        return float(np.sum(out.data.astype(np.float64) * r))

    params = [ad.parameter(a.copy()) for a in arrays]
    with ad.Tape() as tape:
        loss = ad.sum(ad.mul(fn(params), ad.const(r)))
    grads = ad.backward(tape, loss)
    worst = 0.0
    for i, p in enumerate(params):
        an = grads[p.node_id].astype(np.float64)
        fd = np.zeros_like(an)
        for idx in np.ndindex(*arrays[i].shape):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[i][idx] += eps
            minus[i][idx] -= eps
            # the perturbation actually applied after float32 rounding
            h = float(plus[i][idx]) - float(minus[i][idx])
            fd[idx] = (objective(plus) - objective(minus)) / h
        scale = max(np.abs(fd).max(), np.abs(an).max(), 1e-12)
        worst = max(worst, float(np.abs(fd - an).max() / scale))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
