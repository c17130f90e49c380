"""Train-time augmentation: random resized crop, perspective warp, color jitter.

All transforms are gated by a probability and a strength; strength zero (or
probability zero) leaves the image bit-identical, which the tests rely on.
Values are clamped to [0, 1] at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canvas import bilinear_resize


@dataclass(frozen=True)
class AugmentConfig:
    crop_prob: float = 0.0
    crop_min_scale: float = 0.7
    perspective_prob: float = 0.0
    perspective_strength: float = 0.12
    jitter_prob: float = 0.0
    jitter_strength: float = 0.3

    @classmethod
    def none(cls):
        return cls()


def _homography(src_pts, dst_pts):
    """3x3 H mapping dst (x, y) to src coordinates."""
    a, b = [], []
    for (xd, yd), (xs, ys) in zip(dst_pts, src_pts):
        a.append([xd, yd, 1, 0, 0, 0, -xs * xd, -xs * yd])
        b.append(xs)
        a.append([0, 0, 0, xd, yd, 1, -ys * xd, -ys * yd])
        b.append(ys)
    h = np.linalg.solve(np.asarray(a, dtype=np.float64),
                        np.asarray(b, dtype=np.float64))
    return np.append(h, 1.0).reshape(3, 3)


def _warp_perspective(image, hmat):
    c, h, w = image.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    denom = hmat[2, 0] * xs + hmat[2, 1] * ys + hmat[2, 2]
    sx = (hmat[0, 0] * xs + hmat[0, 1] * ys + hmat[0, 2]) / denom
    sy = (hmat[1, 0] * xs + hmat[1, 1] * ys + hmat[1, 2]) / denom
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    sx = np.clip(sx, 0, w - 1)
    sy = np.clip(sy, 0, h - 1)
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0).astype(image.dtype)
    fy = (sy - y0).astype(image.dtype)
    out = np.empty_like(image)
    for ch in range(c):
        plane = image[ch]
        top = plane[y0, x0] * (1 - fx) + plane[y0, x1] * fx
        bot = plane[y1, x0] * (1 - fx) + plane[y1, x1] * fx
        out[ch] = np.where(inside, top * (1 - fy) + bot * fy, 0.0)
    return out


def augment(image, cfg, rng):
    """Apply the configured transforms to a (C, H, W) image in [0, 1]."""
    img = image
    c, h, w = img.shape

    if cfg.crop_prob > 0 and rng.random() < cfg.crop_prob:
        scale = rng.uniform(cfg.crop_min_scale, 1.0)
        ch_, cw_ = max(1, round(h * scale)), max(1, round(w * scale))
        if (ch_, cw_) != (h, w):
            top = int(rng.integers(0, h - ch_ + 1))
            left = int(rng.integers(0, w - cw_ + 1))
            img = bilinear_resize(img[:, top:top + ch_, left:left + cw_], h, w)

    if cfg.perspective_prob > 0 and rng.random() < cfg.perspective_prob:
        d = cfg.perspective_strength * min(h, w)
        if d > 0:
            corners = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1],
                                [0, h - 1]], dtype=np.float64)
            jittered = corners + rng.uniform(-d, d, size=(4, 2))
            img = _warp_perspective(img, _homography(jittered, corners))

    if cfg.jitter_prob > 0 and rng.random() < cfg.jitter_prob:
        s = cfg.jitter_strength
        brightness = 1.0 + rng.uniform(-s, s)
        contrast = 1.0 + rng.uniform(-s, s)
        channel = 1.0 + rng.uniform(-s, s, size=3)
        if brightness != 1.0:
            img = img * np.float32(brightness)
        if contrast != 1.0:
            mean = img.mean()
            img = (img - mean) * np.float32(contrast) + mean
        if np.any(channel != 1.0):
            img = img * channel.astype(np.float32)[:, None, None]

    return np.clip(img, 0.0, 1.0).astype(np.float32)
