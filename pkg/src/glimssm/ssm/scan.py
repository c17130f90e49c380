"""Selective-scan kernel.

Computes, per batch element b and head h,

    h_t = exp(log_a[t]) * h_{t-1} + B_t (x) s_t        h in R^{n x d_head}
    y_t = C_t . h_t

where B_t, C_t are shared across heads and s_t is the (already
delta-scaled) head input.  Two interchangeable backends:

  * "compiled": Cython kernel, exact sequential recurrence with
    chunk-boundary checkpointing for the backward pass;
  * "numpy": chunked associative evaluation built from differentiable
    primitives (pairwise decay matrices within chunks of length `chunk`,
    sequential carry across chunks).

Both scale linearly in T; they agree to reassociation tolerance.  The
backend is selected at import time, overridable via the environment
variable GLIMSSM_SCAN_BACKEND in {auto, compiled, numpy}.
"""

from __future__ import annotations

import os

import numpy as np

from .. import numgrad as ng
from ..numgrad import Tensor

try:
    from . import _scan_core
except ImportError:
    _scan_core = None

_ENV_VAR = "GLIMSSM_SCAN_BACKEND"


def scan_backend():
    """Resolve the active backend name ("compiled" or "numpy")."""
    mode = os.environ.get(_ENV_VAR, "auto")
    if mode not in ("auto", "compiled", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be auto|compiled|numpy, got {mode}")
    if mode == "compiled" and _scan_core is None:
        raise RuntimeError("compiled scan core requested but not built")
    if mode == "numpy":
        return "numpy"
    return "compiled" if _scan_core is not None else "numpy"


def _check_shapes(log_a, bmat, cmat, s):
    b, t, h = log_a.shape
    if bmat.shape[:2] != (b, t) or cmat.shape != bmat.shape:
        raise ng.ShapeMismatch(
            f"scan: B/C shapes {bmat.shape}/{cmat.shape} do not match "
            f"log_a {log_a.shape}")
    if s.shape[:3] != (b, t, h):
        raise ng.ShapeMismatch(
            f"scan: s shape {s.shape} does not match log_a {log_a.shape}")


def scan_sequential(log_a, bmat, cmat, s, h0=None):
    """Plain-loop evaluation on raw arrays; also the recurrent-mode core.

    Returns (y, h_final).  h0 may carry state in; zeros otherwise.
    """
    b, t, heads = log_a.shape
    n = bmat.shape[2]
    hd = s.shape[3]
    h = np.zeros((b, heads, n, hd), dtype=s.dtype) if h0 is None else h0.copy()
    y = np.empty((b, t, heads, hd), dtype=s.dtype)
    a = np.exp(log_a)
    for i in range(t):
        h *= a[:, i, :, None, None]
        h += bmat[:, i, None, :, None] * s[:, i, :, None, :]
        y[:, i] = np.einsum("bn,bhnd->bhd", cmat[:, i], h)
    return y, h


def scan_step(a_t, b_t, c_t, s_t, h):
    """One recurrent update: returns (y_t, h'). All raw arrays.

    a_t: (B, H) decay exp(log_a); b_t, c_t: (B, n); s_t: (B, H, hd);
    h: (B, H, n, hd), updated out of place.
    """
    h = a_t[:, :, None, None] * h + b_t[:, None, :, None] * s_t[:, :, None, :]
    y = np.einsum("bn,bhnd->bhd", c_t, h)
    return y, h


def _scan_numpy(log_a, bmat, cmat, s, chunk):
    """Differentiable chunked evaluation (see module docstring)."""
    b, t, heads = log_a.data.shape
    n = bmat.data.shape[2]
    hd = s.data.shape[3]
    dt = log_a.data.dtype
    neg_inf = np.array(-np.inf, dtype=dt)

    y_chunks = []
    h_state = None                      # (B, H, n, hd) Tensor
    for c0 in range(0, t, chunk):
        c1 = min(c0 + chunk, t)
        c = c1 - c0
        sl = (slice(None), slice(c0, c1))
        la = ng.getitem(log_a, sl)                       # (B, c, H)
        bc = ng.getitem(bmat, sl)                        # (B, c, n)
        cc = ng.getitem(cmat, sl)                        # (B, c, n)
        sc = ng.getitem(s, sl)                           # (B, c, H, hd)

        lcum = ng.cumsum(la, axis=1)                     # (B, c, H)
        lh = ng.transpose(lcum, (0, 2, 1))               # (B, H, c)
        diff = ng.sub(ng.reshape(lh, (b, heads, c, 1)),
                      ng.reshape(lh, (b, heads, 1, c)))  # l_t - l_u
        mask = np.tril(np.ones((c, c), dtype=bool))
        decay = ng.exp(ng.where(mask, diff, neg_inf))    # 0 above diagonal
        gram = ng.einsum("btn,bun->btu", cc, bc)         # C_t . B_u
        mixed = ng.mul(decay, ng.reshape(gram, (b, 1, c, c)))
        y_c = ng.einsum("bhtu,buhd->bthd", mixed, sc)

        l_end = ng.getitem(lcum, (slice(None), c - 1))   # (B, H)
        if h_state is not None:
            carry = ng.einsum("btn,bhnd->bthd", cc, h_state)
            y_c = ng.add(y_c, ng.mul(carry,
                                     ng.reshape(ng.exp(lcum),
                                                (b, c, heads, 1))))
        w_end = ng.exp(ng.sub(ng.reshape(l_end, (b, 1, heads)), lcum))
        sw = ng.mul(sc, ng.reshape(w_end, (b, c, heads, 1)))
        h_new = ng.einsum("bun,buhd->bhnd", bc, sw)
        if h_state is not None:
            h_new = ng.add(h_new, ng.mul(h_state,
                                         ng.reshape(ng.exp(l_end),
                                                    (b, heads, 1, 1))))
        h_state = h_new
        y_chunks.append(y_c)
    return y_chunks[0] if len(y_chunks) == 1 else ng.concat(y_chunks, axis=1)


def _scan_compiled(log_a, bmat, cmat, s, chunk):
    la = np.ascontiguousarray(log_a.data)
    bm = np.ascontiguousarray(bmat.data)
    cm = np.ascontiguousarray(cmat.data)
    sv = np.ascontiguousarray(s.data)
    y, boundary = _scan_core.scan_fwd(la, bm, cm, sv, chunk)

    def backward(g):
        g = np.ascontiguousarray(g)
        return _scan_core.scan_bwd(la, bm, cm, sv, boundary, g, chunk)

    return ng.custom_op(y, (log_a, bmat, cmat, s), backward)


def selective_scan_numpy(log_a, bmat, cmat, s, chunk=64):
    """Force the numpy chunked path (used by equivalence tests)."""
    log_a, bmat, cmat, s = (ng.astensor(x) for x in (log_a, bmat, cmat, s))
    _check_shapes(log_a.data, bmat.data, cmat.data, s.data)
    return _scan_numpy(log_a, bmat, cmat, s, chunk)


def selective_scan(log_a, bmat, cmat, s, chunk=64):
    """Backend-dispatched differentiable scan over Tensors."""
    log_a, bmat, cmat, s = (ng.astensor(x) for x in (log_a, bmat, cmat, s))
    _check_shapes(log_a.data, bmat.data, cmat.data, s.data)
    if scan_backend() == "compiled":
        return _scan_compiled(log_a, bmat, cmat, s, chunk)
    return _scan_numpy(log_a, bmat, cmat, s, chunk)
