"""Coverage-scheduled cross-entropy and the per-step CE baseline.

The scheduled target interpolates linearly between a uniform prior and the
one-hot label with weight equal to the coverage ratio reached at that step:

    target_t = (1 - r_t) * uniform + r_t * onehot(label)

The loss is the mean cross-entropy over all steps between the model logits
and that target.  The standard baseline supervises every step against the
plain one-hot label; it is computed through the identical code path with
the interpolation weight pinned to 1, so the two modes agree bitwise when
r == 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numgrad as ng

LOSS_MODES = ("scheduled", "standard-ce")


@dataclass(frozen=True)
class LossConfig:
    mode: str = "scheduled"
    n_classes: int = 10

    def __post_init__(self):
        if self.mode not in LOSS_MODES:
            raise ValueError(
                f"unknown loss mode {self.mode!r}; expected {LOSS_MODES}")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")


def scheduled_target(r, label, n_classes):
    """Interpolated label distribution for a single step."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"coverage ratio {r} outside [0, 1]")
    if not 0 <= label < n_classes:
        raise ValueError(f"label {label} outside [0, {n_classes})")
    out = np.full(n_classes, (1.0 - r) / n_classes)
    out[label] += r
    return out


def _target_matrix(r, labels, n_classes, dtype):
    """(B, T, N) scheduled targets; r: (B, T) in [0,1], labels: (B,)."""
    b, t = r.shape
    base = (1.0 - r) / n_classes                     # (B, T)
    out = np.repeat(base[:, :, None], n_classes, axis=2).astype(dtype)
    out[np.arange(b)[:, None], np.arange(t)[None, :], labels[:, None]] += \
        r.astype(dtype)
    return out


def sequence_loss(logits, r, labels, cfg):
    """Mean per-step CE between logits and the configured targets.

    logits: (B, T, N) Tensor (or (T, N) for a single sample); r: matching
    (B, T) or (T,) coverage ratios; labels: (B,) or scalar int.
    """
    single = logits.data.ndim == 2
    y = ng.reshape(logits, (1,) + logits.data.shape) if single else logits
    r = np.asarray(r, dtype=np.float64)
    r = r[None, :] if single else r
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))

    b, t, n = y.data.shape
    if n != cfg.n_classes:
        raise ValueError(f"logit width {n} != n_classes {cfg.n_classes}")
    if r.shape != (b, t):
        raise ValueError(f"r shape {r.shape} does not match logits {(b, t)}")
    if np.any((labels < 0) | (labels >= n)):
        raise ValueError("label out of range")
    if np.any((r < 0.0) | (r > 1.0)):
        raise ValueError("coverage ratios must lie in [0, 1]")
    if not np.isfinite(y.data).all():
        raise ValueError("non-finite logits")

    if cfg.mode == "standard-ce":
        r = np.ones_like(r)
    targets = _target_matrix(r, labels, n, y.data.dtype)
    log_probs = ng.log_softmax(y, axis=-1)
    return ng.neg(ng.mean(ng.tensor_sum(ng.mul(log_probs, targets),
                                        axis=-1)))
