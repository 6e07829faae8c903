"""Seeded Latin hypercube designs on the unit cube."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LhsConfig:
    n_points: int
    dimension: int
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1 or self.dimension < 1:
            raise ValueError("n_points and dimension must both be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def latin_hypercube(cfg: LhsConfig) -> np.ndarray:
    """Return an ``(n_points, dimension)`` array with one point per stratum per column.

    Each column is an independent random permutation of the strata
    ``[i/n, (i+1)/n)`` with a uniform jitter inside the stratum.
    """
    rng = np.random.default_rng(cfg.seed)
    n, d = cfg.n_points, cfg.dimension
    strata = np.empty((n, d))
    for k in range(d):
        strata[:, k] = rng.permutation(n)
    jitter = rng.random((n, d))
    pts = (strata + jitter) / n
    # (i + u) / n can round into the next stratum when u is within an ulp of 1
    spill = np.floor(pts * n) > strata
    while spill.any():
        pts[spill] = np.nextafter(pts[spill], 0.0)
        spill = np.floor(pts * n) > strata
    return pts
