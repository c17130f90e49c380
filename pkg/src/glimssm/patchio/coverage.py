"""Per-pixel coverage of the image region by the union of sampled patches."""

from __future__ import annotations

import numpy as np


class CoverageMap:
    """Exact bitmask over image-region pixels; ratio = covered / total."""

    def __init__(self, image_region):
        x0, y0, w, h = image_region
        if w <= 0 or h <= 0:
            raise ValueError(f"degenerate image region {image_region}")
        self.region = (x0, y0, w, h)
        self.mask = np.zeros((h, w), dtype=bool)
        self.covered = 0

    @property
    def ratio(self):
        _, _, w, h = self.region
        return self.covered / (w * h)

    def update(self, rect):
        """Absorb a patch rectangle (canvas coords); returns the new ratio.

        Only the intersection with the image region counts; an empty
        intersection leaves the ratio unchanged.
        """
        x0, y0, w, h = self.region
        px, py, pw, ph = rect
        lx = max(px, x0) - x0
        ly = max(py, y0) - y0
        ux = min(px + pw, x0 + w) - x0
        uy = min(py + ph, y0 + h) - y0
        if lx < ux and ly < uy:
            sub = self.mask[ly:uy, lx:ux]
            self.covered += int(sub.size - np.count_nonzero(sub))
            sub[:] = True
        return self.ratio
