"""Dense float64 tensors with reverse-mode automatic differentiation.

The engine is deliberately small: a ``Tensor`` wraps a numpy array, and a
``Tape`` records every differentiable operation executed while it is active.
One call to ``Tape.backward`` on a scalar root walks the recording in reverse
and accumulates gradients into every ``requires_grad`` leaf.

Ops executed with no active tape (or on constant inputs) just compute values,
which keeps inference cheap. A tape and its tensors belong to one thread;
independent tapes are fully independent.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = [
    "Tensor", "Tape", "ShapeError", "as_tensor", "param", "custom_op",
    "add", "sub", "mul", "div", "neg", "exp", "log", "sigmoid", "tanh",
    "leaky_relu", "softplus", "abs_", "square", "elementwise",
    "matmul", "affine", "transpose", "reshape", "narrow", "gather_flat",
    "broadcast_to", "reduce_sum", "reduce_mean", "reduce_max", "reduce",
    "softmax", "cosine_sim",
]

_tls = threading.local()


class ShapeError(ValueError):
    pass


def _active_tape():
    return getattr(_tls, "tape", None)


class Tensor:
    """A dense float64 array plus gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; every method defers to the module-level ops
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered recording of one forward pass.

    Operations are appended in execution order, so the list is already
    topologically sorted: reversing it visits every consumer before its
    producer. ``backward`` relies on that ordering.
    """

    def __init__(self):
        self._ops = []

    def __enter__(self):
        self._prev = _active_tape()
        _tls.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _tls.tape = self._prev
        return False

    def record(self, out: Tensor, inputs, backward_fn):
        self._ops.append((out, inputs, backward_fn))

    def __len__(self):
        return len(self._ops)

    def backward(self, root: Tensor):
        """Accumulate gradients of ``root`` into every requires_grad leaf.

        Returns a dict mapping each leaf Tensor to its gradient array and
        also stores it on ``leaf.grad``. The recording is consumed.
        """
        if root.data.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {root.data.shape}")
        produced = {id(out) for out, _, _ in self._ops}
        grads = {id(root): [root, np.ones_like(root.data)]}
        for out, inputs, backward_fn in reversed(self._ops):
            entry = grads.pop(id(out), None)
            if entry is None:
                continue
            for t, g in zip(inputs, backward_fn(entry[1])):
                if g is None or not t.requires_grad:
                    continue
                key = id(t)
                slot = grads.get(key)
                if slot is None:
                    grads[key] = [t, g]
                else:
                    # fresh allocation: g may alias a downstream gradient buffer
                    slot[1] = slot[1] + g
        self._ops.clear()
        result = {}
        for key, (t, g) in grads.items():
            if key in produced:
                continue
            g = np.asarray(g, dtype=np.float64)
            if g.shape != t.data.shape:
                g = np.broadcast_to(g, t.data.shape).copy()
            t.grad = g
            result[t] = g
        return result


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def param(data) -> Tensor:
    """A leaf tensor that will receive gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _emit(out_data, inputs, backward_fn) -> Tensor:
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        tape.record(out, inputs, backward_fn)
    return out


def custom_op(out_data, inputs, backward_fn) -> Tensor:
    """Record a fused operation with a caller-supplied backward rule.

    ``backward_fn(grad_out)`` must return one gradient array (or None) per
    input, aligned with ``inputs``. The rule is trusted; check it against
    finite differences in tests.
    """
    return _emit(out_data, tuple(inputs), backward_fn)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    # only scalar-vs-tensor broadcasting is permitted in binary ops
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape) if shape == () else g.reshape(shape)


def _check_binary(a: Tensor, b: Tensor):
    if a.data.shape == b.data.shape:
        return
    if a.data.shape == () or b.data.shape == ():
        return
    raise ShapeError(f"shapes {a.data.shape} and {b.data.shape} are not scalar- or equal-broadcastable")


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b)
    return _emit(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                            _unbroadcast(g, b.data.shape) if b.requires_grad else None))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b)
    return _emit(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                            _unbroadcast(-g, b.data.shape) if b.requires_grad else None))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b)
    return _emit(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None,
                            _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def backward(g):
        ga = gb = None
        with np.errstate(divide="ignore", invalid="ignore"):
            if a.requires_grad:
                ga = _unbroadcast(g / b.data, a.data.shape)
            if b.requires_grad:
                gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return _emit(out, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _emit(-a.data, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _emit(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g / a.data,)

    return _emit(out, (a,), backward)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument cannot overflow
    e = np.exp(-np.abs(x))
    s = 1.0 / (1.0 + e)
    return np.where(x >= 0, s, 1.0 - s)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _emit(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _emit(out, (a,), lambda g: (g * (1.0 - out * out),))


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    factor = np.where(a.data > 0, 1.0, slope)
    return _emit(a.data * factor, (a,), lambda g: (g * factor,))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _emit(out, (a,), lambda g: (g * _sigmoid(x),))


def abs_(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    return _emit(np.abs(a.data), (a,), lambda g: (g * sign,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _emit(a.data * a.data, (a,), lambda g: (g * 2.0 * a.data,))


_UNARY = {
    "neg": neg, "exp": exp, "log": log, "sigmoid": sigmoid, "tanh": tanh,
    "leaky_relu": leaky_relu, "softplus": softplus, "abs": abs_, "square": square,
}
_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div}


def elementwise(op_kind: str, a, b=None, **kwargs) -> Tensor:
    """Dispatch an elementwise op by name (see _UNARY/_BINARY for kinds)."""
    if op_kind in _BINARY:
        if b is None:
            raise ValueError(f"{op_kind} needs two operands")
        return _BINARY[op_kind](a, b, **kwargs)
    if op_kind in _UNARY:
        if b is not None:
            raise ValueError(f"{op_kind} takes one operand")
        return _UNARY[op_kind](a, **kwargs)
    raise ValueError(f"unknown elementwise op {op_kind!r}")


# ---------------------------------------------------------------------------
# structural ops


def matmul(a, b) -> Tensor:
    """Matrix product; extra leading axes follow numpy batching rules."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError("matmul requires at least 2-D operands")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul inner dims disagree: {a.data.shape} @ {b.data.shape}")
    out = np.matmul(a.data, b.data)

    def reduce_leading(g, shape):
        while g.ndim > len(shape):
            g = g.sum(axis=0)
        for ax in range(g.ndim - 2):
            if shape[ax] == 1 and g.shape[ax] != 1:
                g = g.sum(axis=ax, keepdims=True)
        return g

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = reduce_leading(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape)
        if b.requires_grad:
            gb = reduce_leading(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape)
        return ga, gb

    return _emit(out, (a, b), backward)


def affine(x, W, b) -> Tensor:
    """Fused x @ W + b; the bias broadcasts over every leading axis."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.data.ndim < 2 or W.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeError("affine expects x (...,m,k), W (k,n), b (n,)")
    if x.data.shape[-1] != W.data.shape[0] or W.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"affine shapes disagree: {x.data.shape} @ {W.data.shape} + {b.data.shape}")
    out = np.matmul(x.data, W.data) + b.data

    def backward(g):
        gx = np.matmul(g, W.data.T) if x.requires_grad else None
        gw = None
        if W.requires_grad:
            gw = np.matmul(np.swapaxes(x.data, -1, -2), g)
            while gw.ndim > 2:
                gw = gw.sum(axis=0)
        gb = g.reshape(-1, g.shape[-1]).sum(axis=0) if b.requires_grad else None
        return gx, gw, gb

    return _emit(out, (x, W, b), backward)


def transpose(a) -> Tensor:
    """Swap the last two axes."""
    a = as_tensor(a)
    if a.data.ndim < 2:
        raise ShapeError("transpose requires at least 2-D input")
    return _emit(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.data.shape
    return _emit(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis; backward scatters into zeros."""
    a = as_tensor(a)
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def backward(g):
        buf = np.zeros_like(a.data)
        buf[idx] = g
        return (buf,)

    return _emit(a.data[idx].copy(), (a,), backward)


def gather_flat(a, index: np.ndarray) -> Tensor:
    """out.flat[k] = a.flat[index.flat[k]]; backward scatter-adds."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.intp)
    out = a.data.reshape(-1)[index.reshape(-1)].reshape(index.shape)

    def backward(g):
        buf = np.bincount(index.reshape(-1), weights=g.reshape(-1),
                          minlength=a.data.size)
        return (buf.reshape(a.data.shape),)

    return _emit(out, (a,), backward)


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    src = a.data.shape
    out = np.broadcast_to(a.data, shape).copy()

    def backward(g):
        extra = g.ndim - len(src)
        if extra:
            g = g.sum(axis=tuple(range(extra)))
        keep = tuple(ax for ax in range(g.ndim) if src[ax] == 1 and g.shape[ax] != 1)
        if keep:
            g = g.sum(axis=keep, keepdims=True)
        return (g,)

    return _emit(out, (a,), backward)


# ---------------------------------------------------------------------------
# reductions


def _axis_tuple(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def reduce_sum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    axes = _axis_tuple(axis, a.data.ndim)
    if a.data.ndim and not axes and axis is not None:
        raise ShapeError("empty reduction axis")
    out = a.data.sum(axis=axes if a.data.ndim else None)

    def backward(g):
        ge = np.expand_dims(g, axes) if a.data.ndim else g
        return (np.broadcast_to(ge, a.data.shape).copy(),)

    return _emit(out, (a,), backward)


def reduce_mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    axes = _axis_tuple(axis, a.data.ndim)
    count = int(np.prod([a.data.shape[ax] for ax in axes])) if a.data.ndim else 1
    out = a.data.mean(axis=axes if a.data.ndim else None)

    def backward(g):
        ge = np.expand_dims(g, axes) if a.data.ndim else g
        return (np.broadcast_to(ge, a.data.shape) / count,)

    return _emit(out, (a,), backward)


def reduce_max(a, axis=None) -> Tensor:
    """Max reduction; the gradient routes to the first maximal entry."""
    a = as_tensor(a)
    axes = _axis_tuple(axis, a.data.ndim)
    out = a.data.max(axis=axes if a.data.ndim else None)

    def backward(g):
        if a.data.ndim == 0:
            return (g,)
        ge = np.expand_dims(g, axes)
        hit = a.data == np.expand_dims(out, axes)
        if len(axes) == 1:
            first = np.cumsum(hit, axis=axes[0]) == 1
        else:
            flat = hit.reshape(-1)
            first = (np.cumsum(flat) == 1).reshape(hit.shape)
        mask = hit & first
        return (mask * ge,)

    return _emit(out, (a,), backward)


_REDUCERS = {"sum": reduce_sum, "mean": reduce_mean, "max": reduce_max}


def reduce(op_kind: str, a, axis=None) -> Tensor:
    if op_kind not in _REDUCERS:
        raise ValueError(f"unknown reduce op {op_kind!r}")
    return _REDUCERS[op_kind](a, axis=axis)


# ---------------------------------------------------------------------------
# composite primitives


def softmax(a, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax along ``axis``."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _emit(out, (a,), backward)


def cosine_sim(a, b) -> Tensor:
    """Cosine similarity along the last axis.

    Accepts a pair of vectors or a stack of rows against one vector; a
    zero-norm operand yields similarity 0 with zero gradient.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-1]:
        raise ShapeError(f"cosine_sim length mismatch: {a.data.shape} vs {b.data.shape}")
    dot = (a.data * b.data).sum(axis=-1)
    na = np.sqrt((a.data * a.data).sum(axis=-1))
    nb = np.sqrt((b.data * b.data).sum(axis=-1))
    denom = na * nb
    ok = denom > 1e-300
    safe = np.where(ok, denom, 1.0)
    out = np.where(ok, dot / safe, 0.0)

    def backward(g):
        ge = np.expand_dims(g * ok, -1)
        d = np.expand_dims(np.where(ok, dot, 0.0), -1)
        sa = np.expand_dims(np.where(ok, na, 1.0), -1)
        sb = np.expand_dims(np.where(ok, nb, 1.0), -1)
        ga = gb = None
        if a.requires_grad:
            ga = _reduce_like(ge * (b.data / (sa * sb) - a.data * d / (sa ** 3 * sb)),
                              a.data.shape)
        if b.requires_grad:
            gb = _reduce_like(ge * (a.data / (sa * sb) - b.data * d / (sb ** 3 * sa)),
                              b.data.shape)
        return ga, gb

    return _emit(out, (a, b), backward)


def _reduce_like(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    return g
