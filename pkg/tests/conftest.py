"""Shared fixtures: deterministic synthetic stereo scenes and warm kernels."""

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from stereocomfort import (
    DisparityMap,
    GrayImage,
    StereoPair,
    save_disparity,
    save_gray,
)
from stereocomfort import _kernels


def smooth_field(h=48, w=64):
    """Unit-amplitude smooth disparity field shared by every scene."""
    f = gaussian_filter(np.random.default_rng(7).standard_normal((h, w)), 6.0)
    return f / np.abs(f).max()


def smooth_texture(h=48, w=64):
    """Smooth luminance texture spanning [0, 255], shared by every scene."""
    t = gaussian_filter(np.random.default_rng(8).random((h, w)), 2.0)
    return (t - t.min()) / np.ptp(t) * 255.0


def write_source_scenes(out_dir, count=40, h=48, w=64):
    """Write ``count`` source scenes: one texture warped by amp_k * field.

    Only the disparity amplitude varies between scenes (geomspace 12..90 px),
    so the comfort-driven features sweep monotonically while texture content
    stays fixed. Views go out as 8-bit PNG, maps as lossless PFM.
    """
    field = smooth_field(h, w)
    tex = smooth_texture(h, w)
    cols = np.arange(w, dtype=np.float64)
    amps = np.geomspace(12.0, 90.0, count)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, amp in enumerate(amps):
        d = amp * field
        right = np.empty_like(tex)
        for i in range(h):
            right[i] = np.interp(cols - d[i], cols, tex[i])
        stem = out_dir / f"scene{k:02d}"
        save_gray(GrayImage(tex), f"{stem}_left.png")
        save_gray(GrayImage(right), f"{stem}_right.png")
        save_disparity(DisparityMap(d), f"{stem}_disp.pfm")
    return out_dir


def textured_pair(h=32, w=48, shift=0, seed=3, with_dmap=True):
    """Random smooth pair where right[:, j] = left[:, j + shift] (d = shift)."""
    tex = gaussian_filter(np.random.default_rng(seed).random((h, w + abs(shift))), 1.5)
    tex = (tex - tex.min()) / np.ptp(tex) * 255.0
    if shift >= 0:
        left, right = tex[:, : w], tex[:, shift : shift + w]
    else:
        left, right = tex[:, -shift :][:, : w], tex[:, : w]
    pair = StereoPair(GrayImage(left), GrayImage(right))
    if with_dmap:
        return pair, DisparityMap(np.full((h, w), float(shift)))
    return pair


@pytest.fixture(scope="session")
def source_dir(tmp_path_factory):
    return write_source_scenes(tmp_path_factory.mktemp("sources"), count=40)


@pytest.fixture(scope="session")
def small_source_dir(tmp_path_factory):
    return write_source_scenes(tmp_path_factory.mktemp("sources_small"), count=5)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Trigger JIT compilation once so timed tests measure runtime, not numba.
    left = np.random.default_rng(0).random((12, 12))
    cands = np.array([-1, 0, 1], dtype=np.int64)
    _kernels.sad_disparity(left, left, 2, cands, -1, 1, True)
    _kernels.min_vertical_seam(left)
    K = left[:3, :3] @ left[:3, :3].T
    _kernels.smo_epsilon_svr(K, np.array([0.0, 1.0, 2.0]), 1.0, 0.1, 1e-3, 100)
