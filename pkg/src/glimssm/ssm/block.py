"""Gated selective-SSM block (Mamba-2 style internals).

Mixer dataflow: pre-norm -> input projection (stream + gate) -> depthwise
causal conv + SiLU -> input-dependent dt/B/C -> selective scan -> SiLU
gate -> output projection -> residual add.

Parallel mode runs whole sequences through the differentiable scan;
recurrent mode advances one step on a carried state (conv tail of the last
conv_width-1 inputs plus the SSM hidden state), whose size is independent
of how many steps have been consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numgrad as ng
from ..numgrad import Tensor
from ..numgrad.functional import np_rms_norm, np_silu, np_softplus
from .scan import scan_step, selective_scan


@dataclass(frozen=True)
class BackboneConfig:
    n_layers: int
    d_model: int
    expand: int = 2
    d_state: int = 64
    head_dim: int = 64
    conv_width: int = 4
    chunk: int = 64

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if self.d_inner % self.head_dim != 0:
            raise ValueError(
                f"expand*d_model ({self.d_inner}) must be divisible by "
                f"head_dim ({self.head_dim})")

    @property
    def d_inner(self):
        return self.expand * self.d_model

    @property
    def n_heads(self):
        return self.d_inner // self.head_dim


@dataclass
class SsmBlockParams:
    norm_scale: Tensor      # (d_model,)
    w_in: Tensor            # (d_model, 2*d_inner): stream | gate
    conv_w: Tensor          # (d_inner, conv_width)
    w_b: Tensor             # (d_inner, d_state)
    w_c: Tensor             # (d_inner, d_state)
    w_dt: Tensor            # (d_inner, n_heads)
    dt_bias: Tensor         # (n_heads,)
    log_a: Tensor           # (n_heads,), decay rate is -exp(log_a) < 0
    w_out: Tensor           # (d_inner, d_model)

    def named(self, prefix=""):
        return {f"{prefix}{k}": getattr(self, k)
                for k in ("norm_scale", "w_in", "conv_w", "w_b", "w_c",
                          "w_dt", "dt_bias", "log_a", "w_out")}


@dataclass
class SsmLayerState:
    conv_tail: np.ndarray   # (B, conv_width-1, d_inner)
    h: np.ndarray           # (B, n_heads, d_state, head_dim)

    @property
    def nbytes(self):
        return self.conv_tail.nbytes + self.h.nbytes


def _fan_in_uniform(rng, shape):
    bound = shape[0] ** -0.5
    return rng.uniform(-bound, bound, size=shape)


def init_block_params(cfg, rng, dtype=np.float32):
    """Block weights use fan-in uniform init; decay and step-size params use
    the conventional selective-SSM init (A in [1,16], softplus(dt_bias)
    log-uniform in [1e-3, 1e-1])."""
    di, n, heads, k = cfg.d_inner, cfg.d_state, cfg.n_heads, cfg.conv_width
    dt = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), size=heads))
    dt_bias = dt + np.log(-np.expm1(-dt))
    conv_bound = (1.0 / k) ** 0.5

    def t(arr, grad=True):
        return Tensor(np.asarray(arr, dtype=dtype), requires_grad=grad)

    return SsmBlockParams(
        norm_scale=t(np.ones(cfg.d_model)),
        w_in=t(_fan_in_uniform(rng, (cfg.d_model, 2 * di))),
        conv_w=t(rng.uniform(-conv_bound, conv_bound, size=(di, k))),
        w_b=t(_fan_in_uniform(rng, (di, n))),
        w_c=t(_fan_in_uniform(rng, (di, n))),
        w_dt=t(_fan_in_uniform(rng, (di, heads))),
        dt_bias=t(dt_bias),
        log_a=t(np.log(rng.uniform(1.0, 16.0, size=heads))),
        w_out=t(_fan_in_uniform(rng, (di, cfg.d_model))),
    )


def init_layer_state(cfg, batch, dtype=np.float32):
    return SsmLayerState(
        conv_tail=np.zeros((batch, cfg.conv_width - 1, cfg.d_inner),
                           dtype=dtype),
        h=np.zeros((batch, cfg.n_heads, cfg.d_state, cfg.head_dim),
                   dtype=dtype),
    )


def block_forward_parallel(z, p, cfg):
    """Whole-sequence block application; z: (B, T, d_model) Tensor."""
    b, t, d = z.data.shape
    di, heads = cfg.d_inner, cfg.n_heads

    u = ng.rms_norm(z, p.norm_scale)
    xz = ng.matmul(u, p.w_in)
    x_pre = ng.getitem(xz, (Ellipsis, slice(0, di)))
    gate = ng.getitem(xz, (Ellipsis, slice(di, 2 * di)))

    x = ng.silu(ng.causal_conv1d(x_pre, p.conv_w))
    bmat = ng.matmul(x, p.w_b)
    cmat = ng.matmul(x, p.w_c)
    dt = ng.softplus(ng.add(ng.matmul(x, p.w_dt), p.dt_bias))   # (B, T, H)
    neg_a = ng.neg(ng.exp(p.log_a))                             # (H,)
    log_a_t = ng.mul(dt, neg_a)

    xh = ng.reshape(x, (b, t, heads, cfg.head_dim))
    s = ng.mul(xh, ng.reshape(dt, (b, t, heads, 1)))
    y = selective_scan(log_a_t, bmat, cmat, s, chunk=cfg.chunk)
    y = ng.reshape(y, (b, t, di))

    out = ng.matmul(ng.mul(y, ng.silu(gate)), p.w_out)
    return ng.add(z, out)


def block_step(z_t, state, p, cfg):
    """One recurrent step; z_t: (B, d_model) raw array. Returns (z', state')."""
    b = z_t.shape[0]
    di, heads = cfg.d_inner, cfg.n_heads

    u = np_rms_norm(z_t) * p.norm_scale.data
    xz = u @ p.w_in.data
    x_pre = xz[:, :di]
    gate = xz[:, di:]

    conv_in = np.concatenate([state.conv_tail, x_pre[:, None, :]], axis=1)
    x = np.einsum("bkc,ck->bc", conv_in, p.conv_w.data)
    x = np_silu(x)

    bmat = x @ p.w_b.data
    cmat = x @ p.w_c.data
    dt = np_softplus(x @ p.w_dt.data + p.dt_bias.data)          # (B, H)
    a_t = np.exp(dt * -np.exp(p.log_a.data))

    s_t = x.reshape(b, heads, cfg.head_dim) * dt[:, :, None]
    y, h_new = scan_step(a_t, bmat, cmat, s_t, state.h)

    out = (y.reshape(b, di) * np_silu(gate)) @ p.w_out.data + z_t
    return out, SsmLayerState(conv_tail=conv_in[:, 1:], h=h_new)
