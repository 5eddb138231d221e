"""Visual-comfort feature families for stereoscopic retargeted pairs.

Four families feed the regressor, concatenated in a fixed order:

* DR  (1)  disparity range vs. the comfort zone
* BD  (3)  boundary-band disparity averages and the left/right energy ratio
* DID (2)  mean/variance of per-patch disparity gradients, JNDD-ranked and raw
* NIQ (12) gradient-magnitude / relative-gradient statistics per view

plus an optional pass-through block of externally computed full-reference
quality scores.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .disparity import COMFORT_ZONE_PX
from .errors import DimensionError, InputError, ParameterError
from .imagecore import DisparityMap, GrayImage, StereoPair

ENERGY_EPS = 1e-6
GM_FLOOR = 1e-9

NIQ_NAMES = tuple(f"niq_{k:02d}" for k in range(1, 13))
FEATURE_GROUPS = ("dr", "bd", "did", "niq", "fiq")


@dataclass(frozen=True)
class ComfortZone:
    """Disparity interval [d_min, d_max] considered comfortable, in pixels."""

    d_min: float = -COMFORT_ZONE_PX
    d_max: float = COMFORT_ZONE_PX

    def __post_init__(self):
        if not self.d_min < 0.0 < self.d_max:
            raise ParameterError("comfort zone must straddle zero")


@dataclass(frozen=True)
class DrParams:
    """Penalty weights for the crossed/uncrossed extremes plus the
    denominator floor that removes the at-zero singularity."""

    alpha: float = 0.4
    beta: float = 0.6
    denom_floor: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ParameterError("alpha and beta must be non-negative")
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ParameterError("alpha + beta must equal 1")
        if self.denom_floor <= 0:
            raise ParameterError("denom_floor must be positive")


@dataclass(frozen=True)
class DidParams:
    """Weight blending the ranked-gradient and raw-gradient statistics."""

    weight: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ParameterError("weight must lie in [0, 1]")


@dataclass(frozen=True)
class FeatureVector:
    """Ordered features of one stereo pair: [dr | bd | did | niq | fiq?]."""

    dr: float
    bd: tuple[float, float, float]
    did: tuple[float, float]
    niq: tuple[float, ...]
    fiq: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.niq) != 12:
            raise DimensionError("niq block must hold 12 values")
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise InputError("feature vector contains non-finite values")

    def as_array(self) -> np.ndarray:
        return np.array(
            (self.dr, *self.bd, *self.did, *self.niq, *self.fiq), dtype=np.float64
        )

    @property
    def dims(self):
        return 18 + len(self.fiq)


def feature_names(n_fiq: int = 0, fiq_names=None) -> list[str]:
    """Column names matching the FeatureVector ordering."""
    names = ["dr", "bd_al", "bd_ar", "bd_d", "did_mean", "did_var", *NIQ_NAMES]
    if fiq_names is not None:
        names.extend(fiq_names)
    else:
        names.extend(f"fiq_{k + 1:02d}" for k in range(n_fiq))
    return names


def group_slices(n_fiq: int = 0) -> dict[str, slice]:
    """Column spans of each named feature group within the full vector."""
    return {
        "dr": slice(0, 1),
        "bd": slice(1, 4),
        "did": slice(4, 6),
        "niq": slice(6, 18),
        "fiq": slice(18, 18 + n_fiq),
    }


def _floored(value, floor, sign_at_zero):
    s = sign_at_zero if value == 0.0 else math.copysign(1.0, value)
    return s * max(abs(value), floor)


def disparity_range_feature(
    dmap: DisparityMap,
    zone: ComfortZone | None = None,
    params: DrParams | None = None,
) -> float:
    """Penalty for the disparity extremes [x, y] leaving the comfort zone:

        R = alpha * (d_min - x) / x' + beta * (d_max - y) / y'

    where x', y' floor the denominators at ``denom_floor`` pixels, keeping
    the sign (sign(0) is taken as -1 for x and +1 for y, so a flat
    at-screen map reads as a strongly narrow, comfortable range).
    """
    zone = zone or ComfortZone()
    params = params or DrParams()
    x = float(dmap.data.min())
    y = float(dmap.data.max())
    xp = _floored(x, params.denom_floor, -1.0)
    yp = _floored(y, params.denom_floor, 1.0)
    return params.alpha * (zone.d_min - x) / xp + params.beta * (zone.d_max - y) / yp


def image_energy(img: GrayImage) -> float:
    """Population variance of the gray values."""
    return float(np.var(img.data))


def _band_width(column, m):
    # |column mean|, rounded half-up, clamped to a usable band width
    raw = abs(float(column.mean()))
    b = int(math.floor(raw + 0.5))
    return min(max(b, 1), m // 2)


def boundary_disparity_feature(pair: StereoPair, dmap: DisparityMap):
    """Boundary-band disparity averages plus the view-energy ratio.

    Band widths come from the mean disparity of the outermost columns
    (magnitude, rounded, clamped to [1, m//2]); A_l / A_r average the
    disparity over those bands, and D = (E_l + eps) / (E_r + eps) compares
    the gray-value variance of the two views.
    """
    if pair.left.shape != dmap.shape:
        raise DimensionError("pair and disparity dimensions disagree")
    m = dmap.width
    if m < 4:
        raise DimensionError("boundary bands undefined for width < 4")
    d = dmap.data
    b_l = _band_width(d[:, 0], m)
    b_r = _band_width(d[:, m - 1], m)
    a_l = float(d[:, :b_l].mean())
    a_r = float(d[:, m - b_r :].mean())
    e_l = image_energy(pair.left)
    e_r = image_energy(pair.right)
    ratio = (e_l + ENERGY_EPS) / (e_r + ENERGY_EPS)
    return a_l, a_r, ratio


def jndd_threshold(d: float) -> float:
    """Just-noticeable depth difference at base disparity d (pixels).

    Graded on |d|: 21 below 64, 19 below 128, 18 below 192, 20 beyond.
    """
    a = abs(d)
    if a < 64.0:
        return 21.0
    if a < 128.0:
        return 19.0
    if a < 192.0:
        return 18.0
    return 20.0


_SQRT8 = 2.0 * math.sqrt(2.0)


def _patch_gradients(patches):
    # patches: (bi, 3, bj, 3) -> per-patch general gradient
    col_r = patches[:, :, :, 2].mean(axis=1)
    col_l = patches[:, :, :, 0].mean(axis=1)
    row_b = patches[:, 2, :, :].mean(axis=2)
    row_t = patches[:, 0, :, :].mean(axis=2)
    g_h = (col_r - col_l) / 2.0
    g_v = (row_b - row_t) / 2.0
    g_d = (patches[:, 2, :, 2] - patches[:, 0, :, 0]) / _SQRT8
    return np.sqrt(g_h * g_h + g_v * g_v + g_d * g_d)


def did_feature(dmap: DisparityMap, params: DidParams | None = None):
    """Disparity-intensity-distribution feature: (mean, variance) of the
    per-patch general gradient, blended between a JNDD-ranked pass and a
    raw-disparity pass.

    The map is tiled into non-overlapping 3x3 patches (border leftovers
    dropped). In the ranked pass each pixel becomes
    trunc((d - center) / JNDD(center)); gradients are then taken across
    patch columns, rows, and the main diagonal and combined in quadrature.
    """
    params = params or DidParams()
    h, w = dmap.shape
    if h < 3 or w < 3:
        raise DimensionError("disparity map smaller than one 3x3 patch")
    hh, ww = (h // 3) * 3, (w // 3) * 3
    patches = dmap.data[:hh, :ww].reshape(h // 3, 3, w // 3, 3)
    centers = patches[:, 1, :, 1]
    thresh = np.where(
        np.abs(centers) < 64.0,
        21.0,
        np.where(np.abs(centers) < 128.0, 19.0, np.where(np.abs(centers) < 192.0, 18.0, 20.0)),
    )
    ranks = np.trunc(
        (patches - centers[:, None, :, None]) / thresh[:, None, :, None]
    )
    g_rank = _patch_gradients(ranks)
    g_raw = _patch_gradients(patches)
    lam = params.weight
    mean = lam * float(g_rank.mean()) + (1.0 - lam) * float(g_raw.mean())
    var = lam * float(np.var(g_rank)) + (1.0 - lam) * float(np.var(g_raw))
    return mean, var


def _pad_edge(a):
    return np.pad(a, 1, mode="edge")


def _box3_sum(a):
    p = _pad_edge(a)
    return (
        p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
        + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
        + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:]
    )


def _sobel(a):
    p = _pad_edge(a)
    gx = (
        (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    return gx, gy


def _wrap_angle(a):
    # into (-pi, pi]
    return a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))


def _view_niq(img: GrayImage):
    if img.height < 3 or img.width < 3:
        raise DimensionError("NIQ needs views of at least 3x3")
    gx, gy = _sobel(img.data)
    gm = np.sqrt(gx * gx + gy * gy)
    theta = np.where(gm < GM_FLOOR, 0.0, np.arctan2(gy, gx))
    gm_mean3 = _box3_sum(gm) / 9.0
    gx_mean3 = _box3_sum(gx) / 9.0
    gy_mean3 = _box3_sum(gy) / 9.0
    rm = gm - gm_mean3
    ro = _wrap_angle(theta - np.arctan2(gy_mean3, gx_mean3))
    out = []
    for field in (gm, rm, ro):
        out.append(float(field.mean()))
        out.append(float(field.std()))
    return out


def niq_features(pair: StereoPair) -> tuple[float, ...]:
    """Gradient-statistics image-quality block: per view, (mean, std) of
    gradient magnitude, relative gradient magnitude, and relative gradient
    orientation; left 6 values then right 6."""
    return tuple(_view_niq(pair.left) + _view_niq(pair.right))


def extract_features(
    pair: StereoPair,
    dmap: DisparityMap | None = None,
    zone: ComfortZone | None = None,
    dr_params: DrParams | None = None,
    did_params: DidParams | None = None,
    fiq=(),
) -> FeatureVector:
    """Assemble the full feature vector for one pair, in fixed order."""
    if dmap is None:
        dmap = pair.disparity
    if dmap is None:
        raise InputError("no disparity map given and none attached to the pair")
    if dmap.shape != pair.left.shape:
        raise DimensionError("disparity dimensions do not match the views")
    return FeatureVector(
        dr=disparity_range_feature(dmap, zone, dr_params),
        bd=boundary_disparity_feature(pair, dmap),
        did=did_feature(dmap, did_params),
        niq=niq_features(pair),
        fiq=tuple(float(v) for v in fiq),
    )
