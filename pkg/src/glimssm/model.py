"""Full sequential glimpse classifier.

Pipeline per step: concat(flattened patch, move embedding) -> affine+GELU
projection into d_model -> L selective-SSM blocks -> RMS-norm -> affine
classification head.  Whole sequences run in parallel mode (training);
step-wise inference carries one constant-size state per layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import numgrad as ng
from .numgrad import Tensor
from .numgrad.functional import np_gelu, np_rms_norm
from .movemb import MoveEmbeddingConfig, encode_deltas
from .ssm import (
    BackboneConfig,
    block_forward_parallel,
    block_step,
    init_block_params,
    init_layer_state,
)


class NonFiniteActivation(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int
    d_model: int
    patch: int
    n_classes: int
    d_move_emb: int
    channels: int = 3
    d_state: int = 64
    expand: int = 2
    head_dim: int = 64
    conv_width: int = 4
    chunk: int = 64

    @property
    def d_image(self):
        return self.channels * self.patch * self.patch

    @property
    def d_input(self):
        return self.d_image + self.d_move_emb

    def backbone(self):
        return BackboneConfig(
            n_layers=self.n_layers, d_model=self.d_model, expand=self.expand,
            d_state=self.d_state, head_dim=self.head_dim,
            conv_width=self.conv_width, chunk=self.chunk)

    def move_config(self):
        return MoveEmbeddingConfig(d_move_emb=self.d_move_emb)

    def to_dict(self):
        return asdict(self)


# Desk-scale micro presets exercise every code path cheaply; tiny/small/base
# follow the published layer counts at d_model=256, patch 16, move width 512.
_PRESETS = {
    "micro2": dict(n_layers=2, d_model=64, patch=4, d_move_emb=32),
    "micro4": dict(n_layers=4, d_model=128, patch=8, d_move_emb=64),
    "tiny": dict(n_layers=12, d_model=256, patch=16, d_move_emb=512),
    "small": dict(n_layers=24, d_model=256, patch=16, d_move_emb=512),
    "base": dict(n_layers=48, d_model=256, patch=16, d_move_emb=512),
}


def preset(name, n_classes, channels=3):
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; have {sorted(_PRESETS)}")
    return ModelConfig(n_classes=n_classes, channels=channels,
                       **_PRESETS[name])


def preset_names():
    return sorted(_PRESETS)


class GlimpseClassifier:
    """Owns parameters plus the parallel and recurrent execution paths."""

    def __init__(self, cfg, seed=0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.move_cfg = cfg.move_config()
        self._bb = cfg.backbone()
        rng = np.random.default_rng(seed)

        def t(arr):
            return Tensor(np.asarray(arr, dtype=self.dtype),
                          requires_grad=True)

        std = 0.02
        self.w_proj = t(np.clip(rng.normal(0, std, (cfg.d_input, cfg.d_model)),
                                -2 * std, 2 * std))
        self.b_proj = t(np.zeros(cfg.d_model))
        self.blocks = [init_block_params(self._bb, rng, dtype=self.dtype)
                       for _ in range(cfg.n_layers)]
        self.final_norm = t(np.ones(cfg.d_model))
        self.w_head = t(np.clip(rng.normal(0, std, (cfg.d_model,
                                                    cfg.n_classes)),
                                -2 * std, 2 * std))
        self.b_head = t(np.zeros(cfg.n_classes))

    # -- parameters ---------------------------------------------------------
    def parameters(self):
        out = {"proj.w": self.w_proj, "proj.b": self.b_proj}
        for i, blk in enumerate(self.blocks):
            out.update(blk.named(prefix=f"blocks.{i}."))
        out["head.norm_scale"] = self.final_norm
        out["head.w"] = self.w_head
        out["head.b"] = self.b_head
        return out

    def n_parameters(self):
        return sum(p.data.size for p in self.parameters().values())

    def astype(self, dtype):
        """In-place dtype switch (fp32 <-> fp64 for verification runs)."""
        self.dtype = np.dtype(dtype)
        for p in self.parameters().values():
            p.data = p.data.astype(self.dtype)
        return self

    # -- parallel (whole-sequence) path --------------------------------------
    def forward_batch(self, v, m):
        """v: (B, T, d_image), m: (B, T, d_move_emb) arrays -> (B, T, N) Tensor."""
        if v.shape[-1] != self.cfg.d_image:
            raise ValueError(
                f"glimpse vector length {v.shape[-1]} != d_image "
                f"{self.cfg.d_image}")
        x = np.concatenate([v, m], axis=-1).astype(self.dtype, copy=False)
        z = ng.gelu(ng.add(ng.matmul(Tensor(x), self.w_proj), self.b_proj))
        for i, blk in enumerate(self.blocks):
            z = block_forward_parallel(z, blk, self._bb)
            if not np.isfinite(z.data).all():
                raise NonFiniteActivation(
                    f"non-finite activations after layer {i}")
        z = ng.rms_norm(z, self.final_norm)
        return ng.add(ng.matmul(z, self.w_head), self.b_head)

    def forward_sequence(self, glimpses):
        """Single trajectory of GlimpseSteps -> (T, N) logits array."""
        v = np.stack([g.v for g in glimpses]).astype(self.dtype)
        m = encode_deltas([g.delta for g in glimpses], self.move_cfg,
                          dtype=self.dtype)
        for t_idx, g in enumerate(glimpses):
            if g.v.shape[-1] != self.cfg.d_image:
                raise ValueError(
                    f"glimpse {t_idx}: vector length {g.v.shape[-1]} != "
                    f"d_image {self.cfg.d_image}")
        return self.forward_batch(v[None], m[None]).data[0]

    # -- recurrent (step-wise) path ------------------------------------------
    def init_state(self, batch=1):
        return [init_layer_state(self._bb, batch, dtype=self.dtype)
                for _ in range(self.cfg.n_layers)]

    def step_batch(self, v_t, m_t, states):
        """One step for a batch: v_t (B, d_image), m_t (B, d_move_emb)."""
        x = np.concatenate([v_t, m_t], axis=-1).astype(self.dtype,
                                                       copy=False)
        z = np_gelu(x @ self.w_proj.data + self.b_proj.data)
        new_states = []
        for blk, state in zip(self.blocks, states):
            z, st = block_step(z, state, blk, self._bb)
            new_states.append(st)
        z = np_rms_norm(z) * self.final_norm.data
        return z @ self.w_head.data + self.b_head.data, new_states

    def step(self, glimpse, states):
        """Single-sample step from a GlimpseStep; returns ((N,) logits, states)."""
        if states[0].h.shape[0] != 1:
            raise ValueError("step() expects states initialized with batch=1")
        from .movemb import encode_move
        m = encode_move(glimpse.delta, self.move_cfg, dtype=self.dtype)
        logits, states = self.step_batch(glimpse.v[None].astype(self.dtype),
                                         m[None], states)
        return logits[0], states


def count_flops(cfg, t_steps):
    """Closed-form FLOPs (multiply+add = 2) for a length-T forward pass."""
    if t_steps < 1:
        raise ValueError("t_steps must be >= 1")
    di = cfg.expand * cfg.d_model
    heads = di // cfg.head_dim
    n = cfg.d_state
    per_block = (
        cfg.d_model * 2 * di          # input projection (stream + gate)
        + di * cfg.conv_width         # depthwise conv
        + di * n * 2                  # B and C projections
        + di * heads                  # dt projection
        + 3 * heads * n * cfg.head_dim  # scan: outer, decay-update, readout
        + di                          # gate multiply
        + di * cfg.d_model            # output projection
    )
    per_step = (cfg.d_input * cfg.d_model
                + cfg.n_layers * per_block
                + cfg.d_model                    # final norm scale
                + cfg.d_model * cfg.n_classes)
    return 2.0 * per_step * t_steps
