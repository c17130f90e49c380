"""Zero-padded canvases holding a pasted image.

Training canvases keep the image at native size on a randomly sized square
of zeros; evaluation canvases resize the image (aspect preserved, long side
fit) onto a fixed square.  Pixels outside the image region are exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Canvas:
    pixels: np.ndarray          # (C, H_c, W_c) float32
    image_region: tuple         # (x0, y0, w, h) in canvas pixels

    @property
    def height(self):
        return self.pixels.shape[1]

    @property
    def width(self):
        return self.pixels.shape[2]


def bilinear_resize(image, out_h, out_w):
    """Bilinear resample a (C, H, W) image using half-pixel centers."""
    c, h, w = image.shape
    if (h, w) == (out_h, out_w):
        return image.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).astype(image.dtype)[None, :, None]
    wx = (xs - x0).astype(image.dtype)[None, None, :]
    top = image[:, y0][:, :, x0] * (1 - wx) + image[:, y0][:, :, x1] * wx
    bot = image[:, y1][:, :, x0] * (1 - wx) + image[:, y1][:, :, x1] * wx
    return top * (1 - wy) + bot * wy


def _paste_centered(image, side_h, side_w):
    c, h, w = image.shape
    canvas = np.zeros((c, side_h, side_w), dtype=np.float32)
    y0 = (side_h - h) // 2
    x0 = (side_w - w) // 2
    canvas[:, y0:y0 + h, x0:x0 + w] = image
    return Canvas(canvas, (x0, y0, w, h))


def make_train_canvas(image, min_side, max_side, rng):
    """Paste the image unresized onto a square zero canvas of random side.

    The side is drawn uniformly from [min_side, max_side]; if the image is
    larger than the drawn side the canvas is enlarged to fit.
    """
    if min_side > max_side:
        raise ValueError(f"min_side {min_side} > max_side {max_side}")
    side = int(rng.integers(min_side, max_side + 1))
    _, h, w = image.shape
    return _paste_centered(image.astype(np.float32, copy=False),
                           max(side, h), max(side, w))


def make_eval_canvas(image, target_side):
    """Resize so max(h, w) == target_side (aspect preserved), center on zeros."""
    _, h, w = image.shape
    if target_side < 1:
        raise ValueError("target_side must be positive")
    scale = target_side / max(h, w)
    out_h = max(1, round(h * scale))
    out_w = max(1, round(w * scale))
    resized = bilinear_resize(image.astype(np.float32, copy=False),
                              out_h, out_w)
    return _paste_centered(resized, target_side, target_side)
