"""A small tape-based reverse-mode autodiff over float32 numpy arrays.

Usage::

    w = Tensor(np.ones((3, 2)), requires_grad=True)
    with Tape() as tape:
        loss = mean(square(matmul(x, w)))
    grads = backward(tape, loss)
    grads[w.node_id]

Ops record onto the innermost active tape only when one of their inputs
requires grad; outside a tape they are plain forward computations. Every op
also reports its output to registered observers, which is how the profiler
counts activations.
"""
import numpy as np

from . import kernels
from .rng import Rng

DTYPE = np.float32

_VIEW_OPS = frozenset({"reshape"})
_tapes = []
_observers = []
_check_finite = True


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def set_finite_checks(enabled):
    global _check_finite
    _check_finite = bool(enabled)


def add_observer(fn):
    """Register ``fn(op_name, out_array)``; called for every op output."""
    _observers.append(fn)


def remove_observer(fn):
    _observers.remove(fn)


class Tensor:
    __slots__ = ("data", "requires_grad", "node_id", "_tape")

    def __init__(self, data, requires_grad=False):
        self.data = np.ascontiguousarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.node_id = None
        self._tape = None

    @property
    def shape(self):
        return list(self.data.shape)

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class _Record:
    __slots__ = ("op", "inputs", "out", "size", "backward")

    def __init__(self, op, inputs, out, size, backward):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.size = size
        self.backward = backward


class Tape:
    """Append-only op log. Node ids are assigned in creation order."""

    def __init__(self):
        self.records = []
        self.leaves = {}
        self.live_floats = 0
        self.peak_live_floats = 0
        self._next_id = 0

    def __enter__(self):
        _tapes.append(self)
        return self

    def __exit__(self, *exc):
        _tapes.remove(self)
        return False

    def _new_id(self):
        nid = self._next_id
        self._next_id += 1
        return nid

    def _node(self, t):
        """Node id of ``t`` on this tape, registering it as a leaf if needed."""
        if t._tape is not self:
            t._tape = self
            t.node_id = self._new_id()
            self.leaves[t.node_id] = t
        return t.node_id

    def record(self, op, inputs, out, backward):
        ids = tuple(self._node(t) if t.requires_grad else None for t in inputs)
        out.requires_grad = True
        out._tape = self
        out.node_id = self._new_id()
        size = 0 if op in _VIEW_OPS else out.data.size
        self.records.append(_Record(op, ids, out.node_id, size, backward))
        self.live_floats += size
        self.peak_live_floats = max(self.peak_live_floats, self.live_floats)


def _active():
    return _tapes[-1] if _tapes else None


class no_grad:
    """Suspend recording: ops inside run forward-only even under a tape."""

    def __enter__(self):
        _tapes.append(None)
        return self

    def __exit__(self, *exc):
        _tapes.pop()
        return False


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=DTYPE))


def _emit(op, inputs, out_data, backward):
    if _check_finite and not np.isfinite(out_data).all():
        if all(np.isfinite(t.data).all() for t in inputs):
            raise NonFiniteError(f"{op} produced non-finite values from finite inputs")
    out = Tensor(out_data)
    for fn in _observers:
        fn(op, out.data)
    tape = _active()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.record(op, inputs, out, backward)
    return out


def _unbroadcast(g, shape):
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ----------------------------------------------------------------------------
# constructors


def _check_shape(shape):
    shape = [int(s) for s in shape]
    if not shape or any(s < 1 for s in shape):
        raise ShapeError(f"invalid shape {shape}: need at least one dim, all >= 1")
    return shape


def zeros(shape):
    return Tensor(np.zeros(_check_shape(shape), dtype=DTYPE))


def const(data, shape=None):
    arr = np.array(data, dtype=DTYPE)
    if shape is not None:
        arr = arr.reshape(_check_shape(shape))
    else:
        _check_shape(arr.shape)
    return Tensor(arr)


def randn(shape, seed=None, rng=None):
    """Standard normal tensor from a seeded counter-based stream."""
    shape = _check_shape(shape)
    if rng is None:
        if seed is None:
            raise ValueError("randn needs a seed or an Rng")
        rng = Rng(seed)
    return Tensor(rng.normal(shape).astype(DTYPE))


def parameter(data):
    return Tensor(data, requires_grad=True)


# ----------------------------------------------------------------------------
# elementwise


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("add", a, b)
    sa, sb = a.data.shape, b.data.shape
    return _emit("add", (a, b), a.data + b.data,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("sub", a, b)
    sa, sb = a.data.shape, b.data.shape
    return _emit("sub", (a, b), a.data - b.data,
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad
    return _emit("mul", (a, b), ad * bd,
                 lambda g: (_unbroadcast(g * bd, ad.shape) if need_a else None,
                            _unbroadcast(g * ad, bd.shape) if need_b else None))


def scale(a, s):
    a = _as_tensor(a)
    s = DTYPE(s)
    return _emit("scale", (a,), a.data * s, lambda g: (g * s,))


def square(a):
    a = _as_tensor(a)
    ad = a.data
    return _emit("square", (a,), ad * ad, lambda g: (g * (2 * ad),))


def sqrt(a):
    a = _as_tensor(a)
    out = np.sqrt(a.data)
    # d sqrt(x) at x=0 is taken as 0 so a zero residual gives a zero gradient
    inv = np.divide(0.5, out, out=np.zeros_like(out), where=out > 0)
    return _emit("sqrt", (a,), out, lambda g: (g * inv,))


def leaky_relu(a, slope=0.2):
    a = _as_tensor(a)
    if not 0 <= slope <= 1:
        raise ValueError(f"leaky_relu slope must be in [0, 1], got {slope}")
    ad_ = a.data
    out = kernels.leaky_relu(ad_, slope)
    return _emit("leaky_relu", (a,), out, lambda g: (kernels.leaky_relu_grad(ad_, g, slope),))


def sin(a):
    a = _as_tensor(a)
    ad = a.data
    return _emit("sin", (a,), np.sin(ad), lambda g: (g * np.cos(ad),))


def cos(a):
    a = _as_tensor(a)
    ad = a.data
    return _emit("cos", (a,), np.cos(ad), lambda g: (-g * np.sin(ad),))


def _sigmoid(x):
    # exp of -|x| never overflows and keeps relative precision in both tails
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(DTYPE)


def sigmoid(a):
    a = _as_tensor(a)
    out = _sigmoid(a.data)
    return _emit("sigmoid", (a,), out, lambda g: (g * out * (1 - out),))


def softplus(a):
    a = _as_tensor(a)
    ad = a.data
    out = np.logaddexp(DTYPE(0), ad)
    return _emit("softplus", (a,), out,
                 lambda g: (g * _sigmoid(ad),))


# ----------------------------------------------------------------------------
# reductions and shape ops


def sum(a, axis=None):
    a = _as_tensor(a)
    shape = a.data.shape
    out = np.asarray(a.data.sum(axis=axis, dtype=DTYPE))

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).astype(DTYPE),)

    return _emit("sum", (a,), out, bw)


def mean(a, axis=None):
    a = _as_tensor(a)
    shape = a.data.shape
    n = a.data.size if axis is None else int(np.prod([shape[i] for i in np.atleast_1d(axis)]))
    out = np.asarray(a.data.mean(axis=axis, dtype=DTYPE))

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / DTYPE(n), shape).astype(DTYPE),)

    return _emit("mean", (a,), out, bw)


def reshape(a, shape):
    a = _as_tensor(a)
    old = a.data.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {list(old)} as {list(shape)}") from None
    return _emit("reshape", (a,), out, lambda g: (g.reshape(old),))


def transpose(a, axes):
    a = _as_tensor(a)
    inv = np.argsort(axes)
    return _emit("transpose", (a,), np.ascontiguousarray(a.data.transpose(axes)),
                 lambda g: (np.ascontiguousarray(g.transpose(inv)),))


def concat(tensors, axis=-1):
    ts = [_as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]}") from None
    bounds = np.cumsum([t.data.shape[axis] for t in ts])[:-1]
    return _emit("concat", tuple(ts), out,
                 lambda g: tuple(np.ascontiguousarray(p) for p in np.split(g, bounds, axis=axis)))


def take_rows(a, index):
    """Gather ``a[index]`` along axis 0; the backward pass scatter-adds."""
    a = _as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    shape = a.data.shape

    def bw(g):
        full = np.zeros(shape, dtype=DTYPE)
        np.add.at(full, index, g)
        return (full,)

    return _emit("take_rows", (a,), a.data[index], bw)


def window2d(a, n, r, c, side):
    """Rows of the ``side``-square block at (r, c) of an (n*n, C) lattice table.

    A plain slice replaces a gather, and the backward pass writes the block
    into a zero table instead of scattering with ``np.add.at``.
    """
    a = _as_tensor(a)
    C = a.data.shape[-1]
    if a.data.shape[0] != n * n or r < 0 or c < 0 or r + side > n or c + side > n:
        raise ShapeError(f"window2d: block ({r}, {c}, {side}) outside {n}x{n} lattice of {a.shape}")
    view = a.data.reshape(n, n, C)[r:r + side, c:c + side]

    def bw(g):
        full = np.zeros((n, n, C), dtype=DTYPE)
        full[r:r + side, c:c + side] = g.reshape(side, side, C)
        return (full.reshape(n * n, C),)

    return _emit("window2d", (a,), np.ascontiguousarray(view).reshape(side * side, C), bw)


def avgpool2(a):
    """2x2 box average over axes 1 and 2 of a (B, S, S, C) tensor."""
    a = _as_tensor(a)
    B, H, W, C = a.data.shape
    if H % 2 or W % 2:
        raise ShapeError(f"avgpool2: spatial dims must be even, got {a.shape}")
    blocks = a.data.reshape(B, H // 2, 2, W // 2, 2, C)
    out = (blocks[:, :, 0, :, 0] + blocks[:, :, 0, :, 1]
           + blocks[:, :, 1, :, 0] + blocks[:, :, 1, :, 1]) * DTYPE(0.25)

    def bw(g):
        g4 = np.repeat(np.repeat(g * DTYPE(0.25), 2, axis=1), 2, axis=2)
        return (g4,)

    return _emit("avgpool2", (a,), out, bw)


# ----------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    """``a`` (..., k) times ``b`` (k, n)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if b.data.ndim != 2 or a.data.ndim < 1 or a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def bw(g):
        ga = g @ bd.T if need_a else None
        gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1]) if need_b else None
        return (ga, gb)

    return _emit("matmul", (a, b), ad @ bd, bw)


def conv2d(x, w, stride=1, pad=0):
    """Cross-correlation of x (B, C, H, W) with w (F, C, k, k)."""
    x, w = _as_tensor(x), _as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4 or x.data.shape[1] != w.data.shape[1] \
            or w.data.shape[2] != w.data.shape[3]:
        raise ShapeError(f"conv2d: incompatible shapes {x.shape} and {w.shape}")
    B, C, H, W = x.data.shape
    F, _, k, _ = w.data.shape
    if (H + 2 * pad - k) % stride or (W + 2 * pad - k) % stride or H + 2 * pad < k:
        raise ShapeError(
            f"conv2d: input {x.shape} with kernel {k}, pad {pad} not divisible by stride {stride}")
    OH = (H + 2 * pad - k) // stride + 1
    OW = (W + 2 * pad - k) // stride + 1
    cols = kernels.im2col(x.data, k, stride, pad)          # B, C*k*k, OH*OW
    wm = w.data.reshape(F, C * k * k)
    out = np.matmul(wm, cols).reshape(B, F, OH, OW)
    xshape, wshape = x.data.shape, w.data.shape
    need_x, need_w = x.requires_grad, w.requires_grad

    def bw(g):
        gm = g.reshape(B, F, OH * OW)
        gw = gx = None
        if need_w:
            gw = np.einsum("bfp,bkp->fk", gm, cols, optimize=True).reshape(wshape).astype(DTYPE)
        if need_x:
            gcols = np.matmul(wm.T, gm)
            gx = kernels.col2im(np.ascontiguousarray(gcols, dtype=DTYPE), xshape, k, stride, pad)
        return (gx, gw)

    return _emit("conv2d", (x, w), out, bw)


def sq_diff_mean(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sq_diff_mean: shapes {a.shape} and {b.shape} differ")
    d = a.data - b.data
    n = DTYPE(d.size)
    out = np.asarray(np.mean(d * d, dtype=DTYPE))
    return _emit("sq_diff_mean", (a, b), out,
                 lambda g: (g * 2 * d / n, -g * 2 * d / n))


# ----------------------------------------------------------------------------
# reverse pass


def backward(tape, loss):
    """Gradients of a scalar ``loss`` for every leaf on ``tape``.

    Returns ``{node_id: ndarray}``; leaves the loss does not reach get zeros.
    Tracks live floats on the tape: activations are released as their
    records are consumed, gradient buffers are counted while alive.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._tape is not tape or loss.node_id is None:
        raise ValueError("loss is not on this tape")
    grads = {loss.node_id: np.ones_like(loss.data)}
    live = tape.live_floats + 1
    peak = max(tape.peak_live_floats, live)
    for rec in reversed(tape.records):
        g = grads.pop(rec.out, None)
        if g is None:
            live -= rec.size
            continue
        in_grads = rec.backward(g)
        for nid, gi in zip(rec.inputs, in_grads):
            if nid is None or gi is None:
                continue
            gi = np.asarray(gi, dtype=DTYPE)
            prev = grads.get(nid)
            if prev is None:
                grads[nid] = gi
                live += gi.size
            else:
                grads[nid] = prev + gi
        peak = max(peak, live)
        live -= rec.size + g.size
    tape.peak_live_floats = peak
    out = {}
    for nid, leaf in tape.leaves.items():
        g = grads.get(nid)
        out[nid] = np.zeros_like(leaf.data) if g is None else g.reshape(leaf.data.shape)
    return out


def grads_by_name(tape, grads, params):
    """Map a ``backward`` result back to a ``{name: Tensor}`` parameter dict."""
    out = {}
    for name, p in params.items():
        if p._tape is tape and p.node_id in grads:
            out[name] = grads[p.node_id]
        else:
            out[name] = np.zeros_like(p.data)
    return out


# ----------------------------------------------------------------------------
# optimizer


class AdamState:
    def __init__(self, lr=2e-3, beta1=0.0, beta2=0.99, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {}
        self.v = {}
        self.step = 0

    def clone(self):
        s = AdamState(self.lr, self.beta1, self.beta2, self.eps)
        s.m = {k: v.copy() for k, v in self.m.items()}
        s.v = {k: v.copy() for k, v in self.v.items()}
        s.step = self.step
        return s


def adam_step(params, grads, state):
    """Bias-corrected Adam update of ``params`` ({name: Tensor}) in place."""
    if set(params) != set(grads):
        raise KeyError(f"parameter/gradient keys differ: {sorted(set(params) ^ set(grads))}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    lr_t = state.lr / (1.0 - b1 ** t)
    c2 = 1.0 / (1.0 - b2 ** t)
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=DTYPE)
        if g.shape != p.data.shape:
            raise ShapeError(f"adam: gradient shape {list(g.shape)} != parameter {name} shape {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= DTYPE(b1)
        m += DTYPE(1.0 - b1) * g
        v *= DTYPE(b2)
        v += DTYPE(1.0 - b2) * (g * g)
        p.data -= DTYPE(lr_t) * m / (np.sqrt(v * DTYPE(c2)) + DTYPE(state.eps))
    return params, state
