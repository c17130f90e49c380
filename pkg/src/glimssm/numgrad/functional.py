"""Primitive and composite ops.

Each primitive computes its forward value in numpy and, when a tape is
active and any input requires grad, records a closure mapping the output
gradient to input gradients.  The `np_*` helpers hold the raw forward
formulas so the recurrent (no-tape) inference path shares the exact same
numerics as the taped path.
"""

from __future__ import annotations

import numpy as np

from .tensor import ShapeMismatch, Tensor, active_tape, astensor

_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


# ---------------------------------------------------------------------------
# raw numpy forward formulas (shared with the no-tape inference path)

def np_sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def np_silu(x):
    return x * np_sigmoid(x)


def np_gelu(x):
    # tanh form of GELU; its exact derivative is used in the backward pass
    inner = _GELU_C * (x + _GELU_A * x * x * x)
    return 0.5 * x * (1.0 + np.tanh(inner))


def np_softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def np_rms_norm(x, eps=1e-5):
    ms = np.mean(np.square(x), axis=-1, keepdims=True)
    return x / np.sqrt(ms + eps)


def np_logsumexp(x, axis=-1, keepdims=False):
    m = np.max(x, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))
    return out if keepdims else np.squeeze(out, axis=axis)


# ---------------------------------------------------------------------------
# tape plumbing

def _make(data, inputs, backward_fn):
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=track)
    if track:
        tape.record(out, inputs, backward_fn)
    return out


def custom_op(data, inputs, backward_fn):
    """Register an externally computed op (e.g. a fused kernel) on the tape.

    `backward_fn(grad_out)` must return one gradient (or None) per input.
    """
    return _make(data, tuple(inputs), backward_fn)


def _unbroadcast(g, shape):
    """Reduce a broadcast gradient back to `shape`."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape))
                 if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary_shapes(a, b, opname):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeMismatch(
            f"{opname}: shapes {a.data.shape} and {b.data.shape} "
            "do not broadcast") from None


# ---------------------------------------------------------------------------
# elementwise primitives

def add(a, b):
    a = astensor(a)
    b = astensor(b, like=a)
    _binary_shapes(a, b, "add")
    sa, sb = a.data.shape, b.data.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a = astensor(a)
    b = astensor(b, like=a)
    _binary_shapes(a, b, "sub")
    sa, sb = a.data.shape, b.data.shape
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    a = astensor(a)
    b = astensor(b, like=a)
    _binary_shapes(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape),
                            _unbroadcast(g * ad, bd.shape)))


def div(a, b):
    a = astensor(a)
    b = astensor(b, like=a)
    _binary_shapes(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / bd, ad.shape),
                            _unbroadcast(-g * out / bd, bd.shape)))


def neg(a):
    a = astensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def power(a, exponent):
    a = astensor(a)
    e = float(exponent)
    ad = a.data
    return _make(ad ** e, (a,), lambda g: (g * e * ad ** (e - 1.0),))


def exp(a):
    a = astensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def log(a):
    a = astensor(a)
    ad = a.data
    return _make(np.log(ad), (a,), lambda g: (g / ad,))


def tanh(a):
    a = astensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    a = astensor(a)
    out = np_sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),))


def silu(a):
    a = astensor(a)
    ad = a.data
    s = np_sigmoid(ad)

    def backward(g):
        return (g * s * (1.0 + ad * (1.0 - s)),)

    return _make(ad * s, (a,), backward)


def gelu(a):
    a = astensor(a)
    ad = a.data
    inner = _GELU_C * (ad + _GELU_A * ad ** 3)
    t = np.tanh(inner)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * ad * ad)
        return (g * (0.5 * (1.0 + t) + 0.5 * ad * (1.0 - t * t) * dinner),)

    return _make(0.5 * ad * (1.0 + t), (a,), backward)


def softplus(a):
    a = astensor(a)
    ad = a.data
    return _make(np_softplus(ad), (a,), lambda g: (g * np_sigmoid(ad),))


def where(mask, a, b):
    """Select a where mask is true, b otherwise; mask carries no gradient."""
    mask = np.asarray(mask, dtype=bool)
    a = astensor(a)
    b = astensor(b, like=a)
    out = np.where(mask, a.data, b.data)

    def backward(g):
        ga = _unbroadcast(np.where(mask, g, 0.0), a.data.shape)
        gb = _unbroadcast(np.where(mask, 0.0, g), b.data.shape)
        return (ga, gb)

    return _make(out, (a, b), backward)


# ---------------------------------------------------------------------------
# contractions

def matmul(a, b):
    a = astensor(a)
    b = astensor(b, like=a)
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise ShapeMismatch("matmul: operands must be at least 1-d")
    ka = ad.shape[-1]
    kb = bd.shape[-2] if bd.ndim > 1 else bd.shape[0]
    if ka != kb:
        raise ShapeMismatch(
            f"matmul: inner dims differ for shapes {ad.shape} and {bd.shape}")
    out = ad @ bd

    def backward(g):
        if bd.ndim == 1:
            ga = np.multiply.outer(g, bd) if ad.ndim > 1 else g * bd
            gb = np.tensordot(g, ad, axes=(tuple(range(g.ndim)),
                                           tuple(range(ad.ndim - 1))))
            return (_unbroadcast(ga, ad.shape), gb)
        if ad.ndim == 1:
            ga = g @ np.swapaxes(bd, -1, -2)
            gb = np.moveaxis(np.multiply.outer(ad, g), 0, -2)
            return (_unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape))
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return (_unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape))

    return _make(out, (a, b), backward)


def _einsum_operand_grad(spec_out, spec_other, spec_self, g, other, shape):
    g_spec = f"{spec_out},{spec_other}->{spec_self}"
    return np.einsum(g_spec, g, other, optimize=True).reshape(shape)


def einsum(spec, a, b):
    """Two-operand einsum.

    Every index of each operand must appear in the output or in the other
    operand (no internal traces), which makes the backward pass another
    einsum with permuted specs.
    """
    a = astensor(a)
    b = astensor(b, like=a)
    lhs, spec_out = spec.split("->")
    spec_a, spec_b = lhs.split(",")
    for s_self, s_other, name in ((spec_a, spec_b, "first"),
                                  (spec_b, spec_a, "second")):
        missing = set(s_self) - set(spec_out) - set(s_other)
        if missing:
            raise ValueError(
                f"einsum '{spec}': {name} operand has internal index "
                f"{sorted(missing)}; not supported")
    try:
        out = np.einsum(spec, a.data, b.data, optimize=True)
    except ValueError as exc:
        raise ShapeMismatch(
            f"einsum '{spec}': shapes {a.data.shape} and {b.data.shape} "
            f"do not conform ({exc})") from None
    ad, bd = a.data, b.data

    def backward(g):
        ga = _einsum_operand_grad(spec_out, spec_b, spec_a, g, bd, ad.shape)
        gb = _einsum_operand_grad(spec_out, spec_a, spec_b, g, ad, bd.shape)
        return (ga, gb)

    return _make(out, (a, b), backward)


# ---------------------------------------------------------------------------
# reductions

def tensor_sum(a, axis=None, keepdims=False):
    a = astensor(a)
    ad = a.data
    out = ad.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, ad.shape).copy(),)
        gx = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gx, ad.shape).copy(),)

    return _make(out, (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = astensor(a)
    ad = a.data
    if axis is None:
        count = ad.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= ad.shape[ax]
    s = tensor_sum(a, axis=axis, keepdims=keepdims)
    return mul(s, 1.0 / count)


def logsumexp(a, axis=-1, keepdims=False):
    a = astensor(a)
    ad = a.data
    m = np.max(ad, axis=axis, keepdims=True)
    es = np.exp(ad - m)
    ssum = es.sum(axis=axis, keepdims=True)
    out = m + np.log(ssum)
    soft = es / ssum

    def backward(g):
        gx = g if keepdims else np.expand_dims(g, axis)
        return (gx * soft,)

    return _make(out if keepdims else np.squeeze(out, axis=axis), (a,),
                 backward)


def log_softmax(a, axis=-1):
    return sub(a, logsumexp(a, axis=axis, keepdims=True))


def softmax(a, axis=-1):
    return exp(log_softmax(a, axis=axis))


# ---------------------------------------------------------------------------
# shape ops

def reshape(a, shape):
    a = astensor(a)
    src = a.data.shape
    return _make(a.data.reshape(shape), (a,),
                 lambda g: (g.reshape(src),))


def transpose(a, axes):
    a = astensor(a)
    inv = np.argsort(axes)
    return _make(np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inv),))


def _is_basic_key(key):
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None
               or p is Ellipsis for p in parts)


def getitem(a, key):
    a = astensor(a)
    out = a.data[key]
    basic = _is_basic_key(key)

    def backward(g):
        gx = np.zeros_like(a.data)
        if basic:
            gx[key] += g
        else:
            np.add.at(gx, key, g)
        return (gx,)

    return _make(out, (a,), backward)


def concat(tensors, axis=0):
    tensors = [astensor(t) for t in tensors]
    datas = [t.data for t in tensors]
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate(datas, axis=axis), tuple(tensors), backward)


def cumsum(a, axis):
    a = astensor(a)

    def backward(g):
        return (np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis),
                        axis=axis),)

    return _make(np.cumsum(a.data, axis=axis), (a,), backward)


# ---------------------------------------------------------------------------
# composites

def rms_norm(a, scale, eps=1e-5):
    """Root-mean-square normalization over the last axis with a learned scale."""
    a = astensor(a)
    ms = mean(mul(a, a), axis=-1, keepdims=True)
    inv = power(add(ms, eps), -0.5)
    return mul(mul(a, inv), scale)


def causal_conv1d(x, weight):
    """Depthwise causal conv along the middle (time) axis.

    x: (B, T, D), weight: (D, K).  Output position t sees inputs
    t-K+1 .. t, with zero padding on the left.
    """
    x = astensor(x)
    weight = astensor(weight, like=x)
    b, t, d = x.data.shape
    dw, k = weight.data.shape
    if dw != d:
        raise ShapeMismatch(
            f"causal_conv1d: channel dims differ, input {x.data.shape} "
            f"vs weight {weight.data.shape}")
    zeros = Tensor(np.zeros((b, k - 1, d), dtype=x.data.dtype))
    padded = concat([zeros, x], axis=1)
    out = None
    for j in range(k):
        term = mul(getitem(padded, (slice(None), slice(j, j + t))),
                   getitem(weight, (slice(None), j)))
        out = term if out is None else add(out, term)
    return out


# ---------------------------------------------------------------------------
# first-order linear recurrence (the cumulative-scan primitive)

def _scan_combine(a, b):
    """Inclusive Hillis-Steele scan of h_t = a_t * h_{t-1} + b_t along axis 0."""
    acc_a = a.copy()
    acc_b = b.copy()
    t = a.shape[0]
    stride = 1
    while stride < t:
        acc_b[stride:] = acc_b[stride:] + acc_a[stride:] * acc_b[:-stride]
        acc_a[stride:] = acc_a[stride:] * acc_a[:-stride]
        stride *= 2
    return acc_b


def linear_scan_reference(a, b):
    """Sequential-loop evaluation of the same recurrence (oracle)."""
    h = np.zeros_like(b[0])
    out = np.empty_like(b)
    for t in range(b.shape[0]):
        h = a[t] * h + b[t]
        out[t] = h
    return out


def linear_scan(a, b):
    """h_t = a_t * h_{t-1} + b_t with h_0-prior = 0, along axis 0.

    Parallel (associative doubling) evaluation; gradients flow to both the
    decay `a` and the source `b`.
    """
    a = astensor(a)
    b = astensor(b, like=a)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(
            f"linear_scan: shapes {a.data.shape} and {b.data.shape} differ")
    h = _scan_combine(a.data, b.data)
    ad = a.data

    def backward(g):
        # adjoint recurrence r_t = g_t + a_{t+1} r_{t+1}, evaluated with the
        # same doubling combine on time-reversed arrays
        a_next = np.concatenate([ad[1:], np.ones_like(ad[:1])], axis=0)
        r = _scan_combine(np.flip(a_next, 0), np.flip(g, 0))
        r = np.flip(r, 0)
        h_prev = np.concatenate([np.zeros_like(h[:1]), h[:-1]], axis=0)
        return (r * h_prev, r)

    return _make(h, (a, b), backward)
