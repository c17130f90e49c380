"""Sinusoidal encoding of the relative move between consecutive glimpses.

The displacement (dx, dy) in pixels is encoded per axis with interleaved
sin/cos at geometric frequencies and the two axis encodings concatenated.
Depending only on the displacement (never on absolute coordinates) is what
makes the whole pipeline translation invariant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MoveEmbeddingConfig:
    d_move_emb: int = 512
    freq_base: float = 10000.0
    d_axis: int = field(init=False)

    def __post_init__(self):
        if self.d_move_emb % 4 != 0:
            raise ValueError(
                f"d_move_emb must be divisible by 4, got {self.d_move_emb}")
        object.__setattr__(self, "d_axis", self.d_move_emb // 2)

    def frequencies(self, dtype=np.float64):
        i = np.arange(0, self.d_axis, 2, dtype=dtype)
        return self.freq_base ** (-i / self.d_axis)


def _encode_axis(d, cfg, dtype):
    freqs = cfg.frequencies(dtype)
    ang = dtype(d) * freqs
    out = np.empty(cfg.d_axis, dtype=dtype)
    out[0::2] = np.sin(ang)
    out[1::2] = np.cos(ang)
    return out


def encode_move(delta, cfg, dtype=np.float32):
    """Embed one displacement; `delta=None` marks the initial step (zeros)."""
    dtype = np.dtype(dtype).type
    if delta is None:
        return np.zeros(cfg.d_move_emb, dtype=dtype)
    dx, dy = delta
    return np.concatenate([_encode_axis(dx, cfg, dtype),
                           _encode_axis(dy, cfg, dtype)])


def encode_deltas(deltas, cfg, dtype=np.float32):
    """Embed a trajectory's displacement sequence.

    deltas: iterable where element 0 may be None (initial step).
    Returns (T, d_move_emb).
    """
    return np.stack([encode_move(d, cfg, dtype) for d in deltas])
