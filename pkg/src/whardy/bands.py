"""Ratio bands measured on a grid and on its refinement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RatioBand:
    """Per-input ratios on a coarse grid and a refined grid.

    ``drift`` is the largest relative change of the band endpoints (max and
    min ratio) between the two grids; ``input_drift`` is the largest change
    of any single input's ratio.
    """

    coarse: tuple[float, ...]
    fine: tuple[float, ...]
    sizes: tuple[int, int] = (0, 0)
    meta: dict = field(default_factory=dict)

    @property
    def band(self) -> tuple[float, float]:
        both = np.array(self.coarse + self.fine)
        return float(both.min()), float(both.max())

    @property
    def spread(self) -> float:
        lo, hi = self.band
        return hi / lo if lo > 0 else float("inf")

    @property
    def drift(self) -> float:
        c, f = np.array(self.coarse), np.array(self.fine)
        return float(max(_rel(f.max(), c.max()), _rel(f.min(), c.min())))

    @property
    def input_drift(self) -> float:
        c, f = np.array(self.coarse), np.array(self.fine)
        return float(np.max(np.abs(f - c) / np.maximum(np.abs(c), 1e-300)))

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coarse + self.fine)))

    def summary(self) -> dict:
        lo, hi = self.band
        return {
            "grid_sizes": list(self.sizes),
            "max": hi,
            "min": lo,
            "median": float(np.median(self.coarse + self.fine)),
            "spread": self.spread,
            "drift": self.drift,
            "input_drift": self.input_drift,
            **self.meta,
        }


def _rel(a: float, b: float) -> float:
    if b == 0:
        return 0.0 if a == 0 else float("inf")
    return abs(a - b) / abs(b)


def measure_band(ratio_fn, grids, inputs, **meta) -> RatioBand:
    """Evaluate ``ratio_fn(grid, item)`` for every input on both grids."""
    g0, g1 = grids
    coarse = tuple(float(ratio_fn(g0, item)) for item in inputs)
    fine = tuple(float(ratio_fn(g1, item)) for item in inputs)
    return RatioBand(coarse, fine, (g0.size, g1.size), dict(meta))
