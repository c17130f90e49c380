"""Naive scalar-loop reference implementations used as test oracles.

Deliberately slow and dumb: explicit Python loops over flat indices, stdlib
math only where possible.  These stay independent of the vectorized code
paths they check.
"""

import math

import numpy as np


def ref_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += float(a[i, p]) * float(b[p, j])
            out[i, j] = acc
    return out


def ref_softmax(x):
    x = [float(v) for v in x]
    m = max(x)
    ex = [math.exp(v - m) for v in x]
    s = sum(ex)
    return np.array([e / s for e in ex])


def ref_logsumexp(x):
    x = [float(v) for v in x]
    m = max(x)
    return m + math.log(sum(math.exp(v - m) for v in x))


def ref_gelu(x):
    c = math.sqrt(2.0 / math.pi)
    return np.array([0.5 * v * (1.0 + math.tanh(c * (v + 0.044715 * v ** 3)))
                     for v in map(float, x)])


def ref_silu(x):
    return np.array([v / (1.0 + math.exp(-v)) for v in map(float, x)])


def ref_softplus(x):
    return np.array([math.log1p(math.exp(-abs(v))) + max(v, 0.0)
                     for v in map(float, x)])


def ref_rms_norm(x, scale, eps=1e-5):
    x = [float(v) for v in x]
    ms = sum(v * v for v in x) / len(x)
    inv = 1.0 / math.sqrt(ms + eps)
    return np.array([v * inv * float(s) for v, s in zip(x, scale)])


def ref_cumsum(x):
    out = []
    acc = 0.0
    for v in map(float, x):
        acc += v
        out.append(acc)
    return np.array(out)


def ref_causal_conv1d(x, w):
    """x: (T, D), w: (D, K); output t sees x[t-K+1 .. t]."""
    t_len, d = x.shape
    _, k = w.shape
    out = np.zeros((t_len, d), dtype=np.float64)
    for t in range(t_len):
        for c in range(d):
            acc = 0.0
            for j in range(k):
                src = t - (k - 1) + j
                if src >= 0:
                    acc += float(x[src, c]) * float(w[c, j])
            out[t, c] = acc
    return out


def ref_linear_scan(a, b):
    """Sequential h_t = a_t h_{t-1} + b_t over leading axis, h_0-prior = 0."""
    h = np.zeros_like(b[0], dtype=np.float64)
    out = np.zeros(b.shape, dtype=np.float64)
    for t in range(b.shape[0]):
        h = a[t].astype(np.float64) * h + b[t].astype(np.float64)
        out[t] = h
    return out


def ref_selective_scan(log_a, bmat, cmat, s):
    """O(T^2) closed-form evaluation of the selective scan.

    y[t] = C_t . sum_{u<=t} (prod_{v=u+1..t} exp(log_a[v])) * (B_u (x) s_u)

    Shapes: log_a (T, H), bmat (T, N), cmat (T, N), s (T, H, D).
    Returns y (T, H, D) in float64.
    """
    t_len, h_heads = log_a.shape
    n = bmat.shape[1]
    d = s.shape[2]
    y = np.zeros((t_len, h_heads, d), dtype=np.float64)
    for t in range(t_len):
        for h in range(h_heads):
            state = np.zeros((n, d), dtype=np.float64)
            for u in range(t + 1):
                decay = math.exp(float(np.sum(log_a[u + 1:t + 1, h])))
                state += decay * np.outer(bmat[u].astype(np.float64),
                                          s[u, h].astype(np.float64))
            y[t, h] = cmat[t].astype(np.float64) @ state
    return y


def ref_cross_entropy(p, logits):
    """CE(p, y) = -sum_n p_n log softmax(y)_n, scalar loops."""
    lse = ref_logsumexp(logits)
    return -sum(float(pn) * (float(yn) - lse)
                for pn, yn in zip(p, logits))


def ref_sequence_loss(targets, logits):
    """Mean over steps of CE(target_t, logits_t); both (T, N)."""
    total = 0.0
    for t in range(logits.shape[0]):
        total += ref_cross_entropy(targets[t], logits[t])
    return total / logits.shape[0]


def ref_coverage_bitmap(rects, region, canvas_w, canvas_h):
    """Brute-force per-pixel coverage ratios.

    rects: sequence of (x, y, w, h) patch rectangles in canvas coords.
    region: (x0, y0, w, h) image rectangle.  Returns list of ratios after
    each rect is absorbed.
    """
    x0, y0, rw, rh = region
    grid = np.zeros((canvas_h, canvas_w), dtype=bool)
    out = []
    total = rw * rh
    for (px, py, pw, ph) in rects:
        for yy in range(py, py + ph):
            for xx in range(px, px + pw):
                if x0 <= xx < x0 + rw and y0 <= yy < y0 + rh:
                    grid[yy, xx] = True
        out.append(grid.sum() / total)
    return out
