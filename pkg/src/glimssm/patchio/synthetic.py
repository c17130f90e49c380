"""Procedural toy datasets.

`make_shapes_dataset` draws ten axis-aligned shape classes with randomized
center, size, colors and pixel noise; discrimination requires integrating
structure beyond a single small patch.  `make_bars_dataset` is the minimal
two-class smoke set (horizontal vs vertical bar).
"""

from __future__ import annotations

import numpy as np

from .datasets import LabeledImages

SHAPE_CLASSES = [
    "disk", "ring", "square", "square-outline", "triangle",
    "plus", "x-cross", "h-stripes", "v-stripes", "checker",
]


def _shape_mask(cls, size, cx, cy, radius, rng):
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = x - cx, y - cy
    dist2 = dx * dx + dy * dy
    r = radius
    box = (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if cls == 0:
        return dist2 <= r * r
    if cls == 1:
        return (dist2 <= r * r) & (dist2 >= (0.55 * r) ** 2)
    if cls == 2:
        return box
    if cls == 3:
        inner = (np.abs(dx) <= 0.55 * r) & (np.abs(dy) <= 0.55 * r)
        return box & ~inner
    if cls == 4:
        return (dy >= -r) & (dy <= r) & (np.abs(dx) <= (dy + r) / 2.0)
    if cls == 5:
        w = max(1.0, 0.3 * r)
        return ((np.abs(dx) <= w) & (np.abs(dy) <= r)) | \
               ((np.abs(dy) <= w) & (np.abs(dx) <= r))
    if cls == 6:
        w = max(1.0, 0.35 * r)
        return box & ((np.abs(dx - dy) <= w) | (np.abs(dx + dy) <= w))
    period = max(2, int(round(r / 2)))
    if cls == 7:
        return box & ((np.floor(dy / period).astype(int) % 2) == 0)
    if cls == 8:
        return box & ((np.floor(dx / period).astype(int) % 2) == 0)
    if cls == 9:
        return box & (((np.floor(dx / period) + np.floor(dy / period))
                       .astype(int) % 2) == 0)
    raise ValueError(f"unknown shape class {cls}")


def make_shapes_dataset(n, size=32, seed=0, noise=0.02):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for i in range(n):
        cls = int(rng.integers(0, len(SHAPE_CLASSES)))
        jit = size // 8
        cx = size / 2 + rng.integers(-jit, jit + 1)
        cy = size / 2 + rng.integers(-jit, jit + 1)
        radius = rng.uniform(0.22, 0.40) * size
        mask = _shape_mask(cls, size, cx, cy, radius, rng)
        fg = rng.uniform(0.5, 1.0, size=3)
        bg = rng.uniform(0.0, 0.18, size=3)
        img = np.empty((3, size, size), dtype=np.float32)
        for c in range(3):
            img[c] = np.where(mask, fg[c], bg[c])
        if noise > 0:
            img += rng.normal(0.0, noise, size=img.shape).astype(np.float32)
        images.append(np.clip(img, 0.0, 1.0))
        labels.append(cls)
    return LabeledImages(images, np.asarray(labels, dtype=np.int64),
                         len(SHAPE_CLASSES),
                         class_names=list(SHAPE_CLASSES)).validate()


def make_bars_dataset(n, size=16, seed=0):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for _ in range(n):
        cls = int(rng.integers(0, 2))
        thickness = int(rng.integers(2, max(3, size // 4)))
        pos = int(rng.integers(0, size - thickness + 1))
        level = rng.uniform(0.6, 1.0)
        img = np.zeros((3, size, size), dtype=np.float32)
        if cls == 0:
            img[:, pos:pos + thickness, :] = level
        else:
            img[:, :, pos:pos + thickness] = level
        images.append(img)
        labels.append(cls)
    return LabeledImages(images, np.asarray(labels, dtype=np.int64), 2,
                         class_names=["horizontal", "vertical"]).validate()
