"""Disparity estimation by SAD block matching, and comfort-zone geometry.

Block matching stands in for dense optical flow: it is deterministic and
dependency-free, which is what the synthetic corpora need. Real datasets
with precomputed maps should load them through ``imagecore.load_disparity``
instead.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import _kernels
from .errors import DimensionError, ParameterError
from .imagecore import DisparityMap, StereoPair

# Disparity interval of the +/-1 degree comfort zone in the reference
# viewing setup, in pixels.
COMFORT_ZONE_PX = 79.55


@dataclass(frozen=True)
class BlockMatchParams:
    """SAD matcher configuration: window radius, search range, subpixel flag."""

    window_radius: int = 4
    search_min: int = -128
    search_max: int = 128
    subpixel: bool = False

    def __post_init__(self):
        if self.window_radius < 1:
            raise ParameterError("window_radius must be >= 1")
        if self.search_min >= self.search_max:
            raise ParameterError("search_min must be < search_max")


@dataclass(frozen=True)
class ViewingGeometry:
    """Physical viewing setup: distance to screen and horizontal pixel density."""

    viewing_distance_mm: float
    pixels_per_mm: float

    def __post_init__(self):
        if self.viewing_distance_mm <= 0 or self.pixels_per_mm <= 0:
            raise ParameterError("viewing geometry must be strictly positive")


def candidate_order(search_min: int, search_max: int) -> np.ndarray:
    """Candidate shifts sorted by (|d|, d): smallest magnitude first,
    negative before positive on equal magnitude."""
    cands = np.arange(search_min, search_max + 1, dtype=np.int64)
    return cands[np.lexsort((cands, np.abs(cands)))]


def estimate_disparity(pair: StereoPair, params: BlockMatchParams | None = None) -> DisparityMap:
    """Dense left-referenced disparity by winner-takes-all SAD matching.

    For each left pixel the candidate d minimising the SAD between the
    (2r+1)^2 left window and the right window centred at column j - d wins;
    ties go to the smallest |d|, then to the negative one. Borders are
    edge-replicated. Output values lie in [search_min, search_max].
    """
    if params is None:
        params = BlockMatchParams()
    h, w = pair.left.shape
    side = 2 * params.window_radius + 1
    if h < side or w < side:
        raise DimensionError(
            f"views {h}x{w} smaller than the {side}x{side} matching window"
        )
    if params.search_min <= -w or params.search_max >= w:
        raise ParameterError(
            f"search range [{params.search_min}, {params.search_max}] "
            f"exceeds image width {w}"
        )
    cands = candidate_order(params.search_min, params.search_max)
    out = _kernels.sad_disparity(
        pair.left.data,
        pair.right.data,
        params.window_radius,
        cands,
        params.search_min,
        params.search_max,
        params.subpixel,
    )
    return DisparityMap(out)


def comfort_zone_pixels(half_angle_deg: float, geom: ViewingGeometry) -> float:
    """Half-width z (pixels) of the symmetric comfort zone [-z, +z] spanned
    by +/- half_angle_deg of visual angle at the given geometry.

    z = 2 * distance * tan(half_angle / 2) * pixels_per_mm.
    """
    if not 0.0 < half_angle_deg < 10.0:
        raise ParameterError("half_angle_deg must be in (0, 10)")
    half_rad = math.radians(half_angle_deg) / 2.0
    return 2.0 * geom.viewing_distance_mm * math.tan(half_rad) * geom.pixels_per_mm
