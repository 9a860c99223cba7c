"""Grid-based random query points for descriptor training.

The image is split into ``g_d x g_d`` cells and exactly one query point is
drawn uniformly inside each cell, so supervision covers all image regions
instead of clustering at detector-favoured structures.  Draws come from a
counter-based stream keyed by ``(seed, iteration, ...)``: the sample for a
cell depends only on the key and the cell's row-major index, never on data
loading order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import InputError


@dataclass(frozen=True)
class QuerySet:
    """One sub-pixel query point per full ``g_d x g_d`` cell, row-major."""

    points: np.ndarray
    grid_size: int


def grid_random_queries(
    width: int, height: int, g_d: int, seed: int, iteration: int = 0, slot: int = 0
) -> QuerySet:
    """Draw one uniform point strictly inside each ``g_d x g_d`` cell.

    ``width`` and ``height`` must be divisible by ``g_d`` (the crop rule
    upstream guarantees this).  Points are sub-pixel on purpose: descriptors
    are sampled bilinearly anyway and fractional queries exercise the
    interpolation path.
    """
    if width <= 0 or height <= 0 or g_d < 1:
        raise InputError(f"bad query grid arguments: {width} x {height}, g_d={g_d}")
    if width % g_d or height % g_d:
        raise InputError(
            f"image size {width} x {height} is not divisible by the query grid size {g_d}"
        )
    cols, rows = width // g_d, height // g_d
    u = rng.uniforms((rows * cols, 2), seed, rng.STREAM_QUERIES, iteration, slot)
    # Keep draws strictly inside the open cell so no two cells can collide.
    u = np.nextafter(u, 1.0)
    origins = np.stack(
        [
            np.tile(np.arange(cols), rows) * g_d,
            np.repeat(np.arange(rows), cols) * g_d,
        ],
        axis=1,
    ).astype(np.float64)
    return QuerySet(points=origins + u * g_d, grid_size=g_d)
