"""Tensor wrapper and gradient tape.

The tape records every primitive op in execution order; backward walks the
record in reverse, which is a valid reverse topological order because an op
can only consume tensors that already exist.
"""

from __future__ import annotations

import numpy as np


class ShapeMismatch(ValueError):
    """Raised when operand shapes do not conform."""


_ACTIVE_TAPE = None


def active_tape():
    return _ACTIVE_TAPE


class Tensor:
    """Dense fp32/fp64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name})"

    # Operator sugar; the actual implementations live in functional.py.
    def __add__(self, other):
        from . import functional as F
        return F.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from . import functional as F
        return F.mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        from . import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from . import functional as F
        return F.sub(astensor(other, like=self), self)

    def __truediv__(self, other):
        from . import functional as F
        return F.div(self, other)

    def __neg__(self):
        from . import functional as F
        return F.neg(self)

    def __pow__(self, exponent):
        from . import functional as F
        return F.power(self, exponent)

    def __matmul__(self, other):
        from . import functional as F
        return F.matmul(self, other)

    def __getitem__(self, key):
        from . import functional as F
        return F.getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        from . import functional as F
        return F.tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)


def astensor(x, like=None):
    """Coerce x to a Tensor, matching the dtype of `like` when given."""
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if like is not None and arr.dtype != like.dtype:
        arr = arr.astype(like.dtype)
    return Tensor(arr)


class Tape:
    """Ordered record of executed primitive ops.

    Usage:
        with Tape() as tape:
            loss = f(params)
        grads = tape.gradients(loss, params)
    """

    def __init__(self):
        self._records = []          # (out, inputs, backward_fn)
        self._entered = False

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a gradient tape is already active")
        _ACTIVE_TAPE = self
        self._entered = True
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def record(self, out, inputs, backward_fn):
        self._records.append((out, inputs, backward_fn))

    def __len__(self):
        return len(self._records)

    def backward(self, loss):
        """Accumulate gradients for every tensor reachable from `loss`.

        Returns a dict keyed by id(tensor) holding gradient arrays for all
        leaf tensors (requires_grad, not produced by a recorded op).
        """
        if not isinstance(loss, Tensor):
            raise TypeError("loss must be a Tensor")
        if loss.data.size != 1:
            raise ValueError(
                f"backward requires a scalar loss, got shape {loss.data.shape}")
        grads = {id(loss): np.ones_like(loss.data)}
        produced = {id(out) for out, _, _ in self._records}
        leaf_grads = {}
        for out, inputs, backward_fn in reversed(self._records):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            in_grads = backward_fn(g)
            for t, gi in zip(inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                key = id(t)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
        for key, g in grads.items():
            if key not in produced:
                leaf_grads[key] = g
        return leaf_grads

    def gradients(self, loss, leaves):
        """Gradient of `loss` for each leaf; zeros for unused leaves.

        Also stores each gradient on the leaf's `.grad` slot.
        """
        leaf_grads = self.backward(loss)
        out = []
        for p in leaves:
            g = leaf_grads.get(id(p))
            if g is None:
                g = np.zeros_like(p.data)
            else:
                g = np.ascontiguousarray(g, dtype=p.data.dtype)
                if g.shape != p.data.shape:
                    g = g.reshape(p.data.shape)
            p.grad = g
            out.append(g)
        return out
