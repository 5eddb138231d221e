"""Stereoscopic retargeting operators and corpus synthesis.

All four operators shrink in the column direction only and return a
(StereoPair, DisparityMap) with matching widths:

* stereo_crop   - cut columns from both views; unequal offsets shift disparity
* stereo_scale  - horizontal bilinear resample; disparity scales by the ratio
* stereo_seam_carve - remove minimal-energy seams from the left view and the
  disparity-matched pixels from the right view; surviving disparities keep
  their values
* stereo_multi_operator - per block of columns, pick the cheapest of the
  three by removed-energy cost

``synth_corpus`` drives them over a directory of source pairs to build a
labelled test corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import DimensionError, InputError, ParameterError
from .features import ComfortZone, DrParams, disparity_range_feature
from .imagecore import (
    DisparityMap,
    GrayImage,
    StereoPair,
    load_disparity,
    load_gray,
    save_disparity,
    save_gray,
)

OPERATORS = ("crop", "scale", "seam", "multi")


@dataclass(frozen=True)
class RetargetSpec:
    """One retargeting request: target width plus operator-specific knobs."""

    target_width: int
    operator: str
    crop_offsets: tuple[int, int] | None = None
    seam_gamma: float = 1.0
    block_width: int = 36

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ParameterError(f"unknown operator {self.operator!r}")
        if self.target_width <= 0:
            raise ParameterError("target_width must be positive")


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def gradient_energy(img: GrayImage) -> np.ndarray:
    """e1 energy |dx v| + |dy v| by forward differences, last row/column
    replicated (their difference is zero)."""
    if img.height < 2 or img.width < 2:
        raise DimensionError("gradient energy needs at least 2x2")
    return _grad_energy(img.data)


def _grad_energy(v):
    dx = np.abs(np.diff(v, axis=1, append=v[:, -1:]))
    dy = np.abs(np.diff(v, axis=0, append=v[-1:, :]))
    return dx + dy


def find_vertical_seam(energy: np.ndarray) -> np.ndarray:
    """Minimal 8-connected top-to-bottom seam of a per-pixel energy map;
    all ties break leftmost. Returns one column index per row."""
    energy = np.ascontiguousarray(energy, dtype=np.float64)
    if energy.ndim != 2 or energy.shape[1] < 3:
        raise DimensionError("energy map needs at least 3 columns")
    return _kernels.min_vertical_seam(energy)


def seam_energy_total(energy: np.ndarray, seam: np.ndarray) -> float:
    """Cumulative energy along a seam, summed top to bottom."""
    total = 0.0
    for i in range(energy.shape[0]):
        total += energy[i, seam[i]]
    return total


def _delete_per_row(arr, cols):
    h, w = arr.shape
    mask = np.ones((h, w), dtype=bool)
    mask[np.arange(h), cols] = False
    return arr[mask].reshape(h, w - 1)


def _matched_right_columns(d, cols, width):
    # col_r(i) = clamp(round(col_l(i) - d(i, col_l(i))), 0, width-1)
    rows = np.arange(d.shape[0])
    raw = np.floor(cols - d[rows, cols] + 0.5)
    return np.clip(raw, 0, width - 1).astype(np.int64)


def _combined_seam_energy(left, right, d, gamma):
    h, w = left.shape
    el = _grad_energy(left)
    er = _grad_energy(right)
    cols = np.arange(w)[None, :].repeat(h, axis=0)
    rcols = np.clip(np.floor(cols - d + 0.5), 0, w - 1).astype(np.int64)
    rows = np.arange(h)[:, None]
    dgrad = np.abs(np.diff(d, axis=1, append=d[:, -1:]))
    return el + er[rows, rcols] + gamma * dgrad


def _carve_arrays(left, right, d, k, gamma):
    removed_energy = 0.0
    for _ in range(k):
        energy = _combined_seam_energy(left, right, d, gamma)
        seam = _kernels.min_vertical_seam(energy)
        removed_energy += seam_energy_total(energy, seam)
        rcols = _matched_right_columns(d, seam, right.shape[1])
        left = _delete_per_row(left, seam)
        right = _delete_per_row(right, rcols)
        d = _delete_per_row(d, seam)
    return left, right, d, removed_energy


def stereo_seam_carve(
    pair: StereoPair, dmap: DisparityMap, k: int, gamma: float = 1.0
) -> tuple[StereoPair, DisparityMap]:
    """Remove k geometrically matched seams.

    Each iteration scores the left view with its own gradient energy plus
    the right view's energy sampled at the disparity-matched columns plus
    gamma * |dx d|, deletes the minimal seam on the left, and deletes the
    matched pixel per row on the right. Disparity values of surviving
    pixels are untouched.
    """
    _check_pair_dmap(pair, dmap)
    w = pair.width
    if not 0 <= k < w - 2:
        raise ParameterError(f"cannot carve {k} seams from width {w}")
    left, right, d, _ = _carve_arrays(
        pair.left.data.copy(), pair.right.data.copy(), dmap.data.copy(), k, gamma
    )
    return StereoPair(GrayImage(left), GrayImage(right)), DisparityMap(d)


def stereo_crop(
    pair: StereoPair,
    dmap: DisparityMap,
    target_width: int,
    offset_left: int | None = None,
    offset_right: int | None = None,
) -> tuple[StereoPair, DisparityMap]:
    """Keep ``target_width`` columns of each view starting at the given
    offsets (centered, equal offsets by default). The left-referenced
    disparity becomes d + (offset_right - offset_left)."""
    _check_pair_dmap(pair, dmap)
    w = pair.width
    if not 0 < target_width <= w:
        raise ParameterError(f"target width {target_width} invalid for width {w}")
    if offset_left is None:
        offset_left = (w - target_width) // 2
    if offset_right is None:
        offset_right = offset_left
    for name, off in (("offset_left", offset_left), ("offset_right", offset_right)):
        if off < 0 or off + target_width > w:
            raise ParameterError(f"{name}={off} out of range for width {w}")
    left = pair.left.data[:, offset_left : offset_left + target_width]
    right = pair.right.data[:, offset_right : offset_right + target_width]
    d = dmap.data[:, offset_left : offset_left + target_width] + float(
        offset_right - offset_left
    )
    return StereoPair(GrayImage(left), GrayImage(right)), DisparityMap(d)


def _resample_columns(v, target_width):
    w = v.shape[1]
    x = (np.arange(target_width, dtype=np.float64) + 0.5) * (w / target_width) - 0.5
    x0 = np.floor(x)
    t = x - x0
    i0 = np.clip(x0.astype(np.int64), 0, w - 1)
    i1 = np.minimum(i0 + 1, w - 1)
    a = v[:, i0]
    return a + t[None, :] * (v[:, i1] - a)


def stereo_scale(
    pair: StereoPair, dmap: DisparityMap, target_width: int
) -> tuple[StereoPair, DisparityMap]:
    """Bilinear horizontal resample of both views; the disparity map is
    resampled the same way and its values multiplied by the scale factor."""
    _check_pair_dmap(pair, dmap)
    w = pair.width
    if not 0 < target_width <= w:
        raise ParameterError(f"target width {target_width} invalid for width {w}")
    s = target_width / w
    left = _resample_columns(pair.left.data, target_width)
    right = _resample_columns(pair.right.data, target_width)
    d = _resample_columns(dmap.data, target_width) * s
    return StereoPair(GrayImage(left), GrayImage(right)), DisparityMap(d)


def _quota_targets(widths, target_total):
    # largest-remainder allocation so the per-block targets sum exactly
    total = sum(widths)
    exact = [wb * target_total / total for wb in widths]
    base = [int(math.floor(e)) for e in exact]
    short = target_total - sum(base)
    order = sorted(range(len(widths)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def stereo_multi_operator(
    pair: StereoPair,
    dmap: DisparityMap,
    target_width: int,
    block_width: int = 36,
    gamma: float = 1.0,
) -> tuple[StereoPair, DisparityMap]:
    """Per consecutive block of ``block_width`` columns, reduce to its share
    of the target width with whichever of equal-offset crop, seam carve, or
    scale removes the least gradient energy (ties: crop, then seam, then
    scale). Crop and seam blocks keep their disparities; scaled blocks
    rescale theirs."""
    _check_pair_dmap(pair, dmap)
    if block_width < 3:
        raise ParameterError("block_width must be >= 3")
    w = pair.width
    if not 0 < target_width <= w:
        raise ParameterError(f"target width {target_width} invalid for width {w}")
    starts = list(range(0, w, block_width))
    widths = [min(block_width, w - s) for s in starts]
    targets = _quota_targets(widths, target_width)
    out_left, out_right, out_d = [], [], []
    for s, wb, tb in zip(starts, widths, targets):
        sl = slice(s, s + wb)
        lb = pair.left.data[:, sl]
        rb = pair.right.data[:, sl]
        db = dmap.data[:, sl]
        k = wb - tb
        if k == 0:
            out_left.append(lb)
            out_right.append(rb)
            out_d.append(db)
            continue
        eb = _grad_energy(lb)
        # crop: cut k//2 columns on the left edge, the rest on the right
        o = k // 2
        crop_cost = float(eb[:, :o].sum() + eb[:, o + tb :].sum())
        # seam: feasible only while the DP has room to run
        if tb >= 1 and k < wb - 2 and wb >= 3:
            cl, cr, cd, seam_cost = _carve_arrays(
                lb.copy(), rb.copy(), db.copy(), k, gamma
            )
        else:
            cl = cr = cd = None
            seam_cost = math.inf
        # scale: proxy cost, the energy share of the removed fraction
        if tb >= 1:
            scale_cost = (1.0 - tb / wb) * float(eb.sum())
        else:
            scale_cost = math.inf
        costs = (crop_cost, seam_cost, scale_cost)
        choice = costs.index(min(costs))
        if choice == 0:
            out_left.append(lb[:, o : o + tb])
            out_right.append(rb[:, o : o + tb])
            out_d.append(db[:, o : o + tb])
        elif choice == 1:
            out_left.append(cl)
            out_right.append(cr)
            out_d.append(cd)
        else:
            sb = tb / wb
            out_left.append(_resample_columns(lb, tb))
            out_right.append(_resample_columns(rb, tb))
            out_d.append(_resample_columns(db, tb) * sb)
    left = np.hstack([b for b in out_left if b.shape[1]])
    right = np.hstack([b for b in out_right if b.shape[1]])
    d = np.hstack([b for b in out_d if b.shape[1]])
    pair_out = StereoPair(GrayImage(left), GrayImage(right)), DisparityMap(d)
    if left.shape[1] != target_width:  # quota guarantees this; belt only
        return stereo_crop(pair_out[0], pair_out[1], target_width)
    return pair_out


def apply_retarget(
    pair: StereoPair, dmap: DisparityMap, spec: RetargetSpec
) -> tuple[StereoPair, DisparityMap]:
    """Dispatch one RetargetSpec to its operator."""
    if spec.operator == "crop":
        o_l, o_r = spec.crop_offsets if spec.crop_offsets else (None, None)
        return stereo_crop(pair, dmap, spec.target_width, o_l, o_r)
    if spec.operator == "scale":
        return stereo_scale(pair, dmap, spec.target_width)
    if spec.operator == "seam":
        return stereo_seam_carve(
            pair, dmap, pair.width - spec.target_width, spec.seam_gamma
        )
    return stereo_multi_operator(
        pair, dmap, spec.target_width, spec.block_width, spec.seam_gamma
    )


def _check_pair_dmap(pair, dmap):
    if dmap is None:
        raise InputError("a disparity map is required")
    if dmap.shape != pair.left.shape:
        raise DimensionError("disparity dimensions do not match the views")


# --- corpus synthesis --------------------------------------------------------

_IMAGE_EXTS = (".png", ".pgm", ".ppm")


def synthetic_comfort_label(dr: float) -> float:
    """Fixed monotone map from the disparity-range feature to a 1..5 score:
    1 + 4 * logistic(dr / 4). Synthetic only; never a human rating."""
    return 1.0 + 4.0 / (1.0 + math.exp(-dr / 4.0))


def discover_sources(source_dir) -> list[tuple[str, Path, Path, Path | None]]:
    """Find stereo sources named ``<scene>_left.<ext>`` with a matching
    ``<scene>_right.<ext>`` and optional ``<scene>_disp.pfm|png``."""
    src = Path(source_dir)
    scenes = []
    for left in sorted(src.glob("*_left.*")):
        if left.suffix.lower() not in _IMAGE_EXTS:
            continue
        scene = left.name[: -len("_left" + left.suffix)]
        right = None
        for ext in _IMAGE_EXTS:
            cand = src / f"{scene}_right{ext}"
            if cand.exists():
                right = cand
                break
        if right is None:
            raise InputError(f"no right view found for scene {scene!r}")
        disp = None
        for ext in (".pfm", ".png"):
            cand = src / f"{scene}_disp{ext}"
            if cand.exists():
                disp = cand
                break
        scenes.append((scene, left, right, disp))
    if not scenes:
        raise InputError(f"no '*_left.*' sources found in {source_dir}")
    return scenes


def synth_corpus(
    source_dir,
    out_dir,
    ratio: float = 0.7,
    seed: int = 0,
    synthetic_mos: bool = False,
    noise_sigma: float = 0.05,
    disp_scale: float = 1.0,
    disp_offset: float = 0.0,
    block_width: int = 36,
    crop_shift_max: int = 4,
    estimate_missing=None,
):
    """Retarget every source pair with all four operators at ``ratio`` and
    write a self-contained corpus (PNG views, PFM maps, manifest.csv with
    paths relative to the output directory).

    The crop variant draws a seeded left offset and shifts the right offset
    by at most ``crop_shift_max`` pixels against it, i.e. a mild depth edit
    rather than an arbitrary one.

    With ``synthetic_mos`` each row gets a label from
    :func:`synthetic_comfort_label` on its own disparity-range feature plus
    seeded Gaussian noise, clipped to [1, 5], and is flagged synthetic.
    Returns (manifest_rows, failures).
    """
    from .manifest import ManifestRow  # local import to avoid a cycle

    if not 0.0 < ratio <= 1.0:
        raise ParameterError("ratio must lie in (0, 1]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    zone = ComfortZone()
    drp = DrParams()
    rows = []
    failures = []
    for scene, left_path, right_path, disp_path in discover_sources(source_dir):
        try:
            pair = StereoPair(load_gray(left_path), load_gray(right_path))
            if disp_path is not None:
                dmap = load_disparity(disp_path, disp_scale, disp_offset)
            elif estimate_missing is not None:
                dmap = estimate_missing(pair)
            else:
                raise InputError(f"scene {scene!r} has no disparity map")
            if dmap.shape != pair.left.shape:
                raise DimensionError(f"scene {scene!r}: disparity/view size mismatch")
            w = pair.width
            target = _round_half_up(ratio * w)
            c = w - target
            s = min(max(crop_shift_max, 0), c)
            shift = int(rng.integers(-s, s + 1))
            o_l = int(rng.integers(max(0, -shift), c - max(0, shift) + 1))
            o_r = o_l + shift
            variants = [("source", pair, dmap)]
            specs = [
                RetargetSpec(target, "crop", crop_offsets=(o_l, o_r)),
                RetargetSpec(target, "scale"),
                RetargetSpec(target, "seam"),
                RetargetSpec(target, "multi", block_width=block_width),
            ]
            for spec in specs:
                rp, rd = apply_retarget(pair, dmap, spec)
                variants.append((spec.operator, rp, rd))
            for method, vp, vd in variants:
                stem = f"{scene}_{method}"
                lname, rname, dname = (
                    f"{stem}_left.png",
                    f"{stem}_right.png",
                    f"{stem}_disp.pfm",
                )
                save_gray(vp.left, out / lname)
                save_gray(vp.right, out / rname)
                save_disparity(vd, out / dname)
                mos_vc = None
                if synthetic_mos:
                    dr = disparity_range_feature(vd, zone, drp)
                    noise = float(rng.normal(0.0, noise_sigma))
                    mos_vc = min(5.0, max(1.0, synthetic_comfort_label(dr) + noise))
                rows.append(
                    ManifestRow(
                        id=stem,
                        method=method,
                        left_path=lname,
                        right_path=rname,
                        disparity_path=dname,
                        mos_vc=mos_vc,
                        synthetic=synthetic_mos,
                    )
                )
        except Exception as exc:  # noqa: BLE001 - per-scene isolation
            failures.append((scene, f"{type(exc).__name__}: {exc}"))
    return rows, failures
