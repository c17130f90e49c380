"""Scan policies and trajectory generation.

A trajectory is a sequence of glimpse steps: flattened patch content, the
signed pixel displacement from the previous patch (top-left to top-left),
and the cumulative coverage ratio of the image region after absorbing the
patch.  Policies:

  random-image       patch position uniform, patch fully inside the image
  random-mixed       per trajectory, 50/50: inside-image vs anywhere on canvas
  raster-horizontal  non-overlapping P-grid of the image region, row-major
  zigzag-horizontal  same grid, alternate rows reversed

Deterministic sweeps repeat cyclically when the grid is shorter than the
requested length and truncate when it is longer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coverage import CoverageMap

POLICY_KINDS = ("random-image", "random-mixed",
                "raster-horizontal", "zigzag-horizontal")
DETERMINISTIC_KINDS = ("raster-horizontal", "zigzag-horizontal")


@dataclass(frozen=True)
class ScanPolicy:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(
                f"unknown policy kind {self.kind!r}; expected one of "
                f"{POLICY_KINDS}")

    @property
    def deterministic(self):
        return self.kind in DETERMINISTIC_KINDS


@dataclass
class GlimpseStep:
    v: np.ndarray               # flattened C*P*P patch
    delta: tuple | None         # (dx, dy) pixels; None marks the initial step
    r: float                    # coverage ratio after absorbing this patch
    coord: tuple                # absolute (x, y) of the patch top-left


def grid_coords(image_region, patch, kind="raster-horizontal"):
    """Top-left coords of the non-overlapping patch grid over the region."""
    x0, y0, w, h = image_region
    gw, gh = w // patch, h // patch
    if gw < 1 or gh < 1:
        raise ValueError(
            f"image region {w}x{h} smaller than one {patch}x{patch} patch; "
            "deterministic scans need at least one grid cell")
    coords = []
    for j in range(gh):
        xs = range(gw) if (kind == "raster-horizontal" or j % 2 == 0) \
            else range(gw - 1, -1, -1)
        coords.extend((x0 + i * patch, y0 + j * patch) for i in xs)
    return coords


def _uniform_range(lo, hi, limit):
    lo = min(max(lo, 0), limit)
    hi = min(max(hi, lo), limit)
    return lo, hi


def iter_trajectory(canvas, policy, length, patch, rng=None):
    """Yield `length` glimpse steps; streaming, O(canvas) memory."""
    if length < 1:
        raise ValueError("trajectory length must be >= 1")
    if patch > min(canvas.height, canvas.width):
        raise ValueError(
            f"patch {patch} exceeds canvas {canvas.height}x{canvas.width}")
    if rng is None:
        rng = np.random.default_rng(policy.seed)

    x0, y0, w, h = canvas.image_region
    if policy.deterministic:
        coords = grid_coords(canvas.image_region, patch, policy.kind)

        def positions():
            for t in range(length):
                yield coords[t % len(coords)]
    else:
        if policy.kind == "random-mixed" and rng.random() < 0.5:
            lo_x, hi_x = 0, canvas.width - patch
            lo_y, hi_y = 0, canvas.height - patch
        else:
            lo_x, hi_x = _uniform_range(x0, x0 + w - patch,
                                        canvas.width - patch)
            lo_y, hi_y = _uniform_range(y0, y0 + h - patch,
                                        canvas.height - patch)

        def positions():
            for t in range(length):
                yield (int(rng.integers(lo_x, hi_x + 1)),
                       int(rng.integers(lo_y, hi_y + 1)))

    cov = CoverageMap(canvas.image_region)
    prev = None
    for (px, py) in positions():
        r = cov.update((px, py, patch, patch))
        v = canvas.pixels[:, py:py + patch, px:px + patch].reshape(-1).copy()
        delta = None if prev is None else (px - prev[0], py - prev[1])
        yield GlimpseStep(v=v, delta=delta, r=r, coord=(px, py))
        prev = (px, py)


def generate_trajectory(canvas, policy, length, patch, rng=None):
    return list(iter_trajectory(canvas, policy, length, patch, rng=rng))
