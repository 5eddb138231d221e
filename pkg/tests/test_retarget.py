"""Retargeting operators, quota arithmetic, and corpus synthesis."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereocomfort import (
    DisparityMap,
    GrayImage,
    InputError,
    ParameterError,
    RetargetSpec,
    StereoPair,
    apply_retarget,
    find_vertical_seam,
    gradient_energy,
    stereo_crop,
    stereo_multi_operator,
    stereo_scale,
    stereo_seam_carve,
    synth_corpus,
    synthetic_comfort_label,
)
from stereocomfort.manifest import read_manifest, write_manifest
from stereocomfort.retarget import (
    _quota_targets,
    discover_sources,
    seam_energy_total,
)

from conftest import textured_pair


# --- energy and seams ---------------------------------------------------------


def test_gradient_energy_forward_diffs():
    img = GrayImage(np.array([[0.0, 1.0, 3.0], [4.0, 4.0, 9.0]]))
    e = gradient_energy(img)
    # |dx| with last column replicated, plus |dy| with last row replicated
    want = np.array([[1.0, 2.0, 0.0], [0.0, 5.0, 0.0]]) + np.array(
        [[4.0, 3.0, 6.0], [0.0, 0.0, 0.0]]
    )
    assert np.array_equal(e, want)
    with pytest.raises(Exception):
        gradient_energy(GrayImage(np.zeros((1, 5))))


def test_find_vertical_seam_follows_low_energy():
    e = np.full((4, 5), 9.0)
    path = [1, 2, 3, 3]
    for i, j in enumerate(path):
        e[i, j] = 0.0
    assert find_vertical_seam(e).tolist() == path
    assert seam_energy_total(e, np.array(path)) == 0.0


def test_find_vertical_seam_breaks_ties_leftmost():
    assert find_vertical_seam(np.ones((3, 4))).tolist() == [0, 0, 0]


def test_find_vertical_seam_is_8_connected():
    # the cheap cells are 2 columns apart; a seam cannot join them
    e = np.array([[0.0, 9.0, 1.0], [9.0, 9.0, 0.0]])
    seam = find_vertical_seam(e)
    assert abs(seam[1] - seam[0]) <= 1


def test_find_vertical_seam_validation():
    with pytest.raises(Exception):
        find_vertical_seam(np.ones((3, 2)))


# --- crop ----------------------------------------------------------------


def test_crop_centered_default():
    pair, dmap = textured_pair(h=8, w=12)
    out, d = stereo_crop(pair, dmap, 6)
    assert out.width == d.width == 6
    assert np.array_equal(out.left.data, pair.left.data[:, 3:9])
    assert np.array_equal(d.data, dmap.data[:, 3:9])


def test_crop_unequal_offsets_shift_disparity():
    pair, dmap = textured_pair(h=8, w=12, shift=2)
    out, d = stereo_crop(pair, dmap, 6, offset_left=1, offset_right=4)
    assert np.array_equal(out.left.data, pair.left.data[:, 1:7])
    assert np.array_equal(out.right.data, pair.right.data[:, 4:10])
    assert np.all(d.data == 2.0 + 3.0)


def test_crop_validation():
    pair, dmap = textured_pair(h=8, w=12)
    with pytest.raises(ParameterError):
        stereo_crop(pair, dmap, 13)
    with pytest.raises(ParameterError):
        stereo_crop(pair, dmap, 6, offset_left=7)
    with pytest.raises(ParameterError):
        stereo_crop(pair, dmap, 6, offset_right=-1)


# --- scale ----------------------------------------------------------------


def test_scale_identity_at_same_width():
    pair, dmap = textured_pair(h=8, w=12)
    out, d = stereo_scale(pair, dmap, 12)
    assert np.array_equal(out.left.data, pair.left.data)
    assert np.array_equal(d.data, dmap.data)


def test_scale_constant_disparity_scales_exactly():
    img = GrayImage(np.random.default_rng(0).random((8, 60)) * 255)
    dmap = DisparityMap(np.full((8, 60), 10.0))
    _, d = stereo_scale(StereoPair(img, img), dmap, 42)
    assert d.width == 42
    assert np.all(d.data == 10.0 * 0.7)


def test_scale_preserves_constant_images():
    img = GrayImage(np.full((6, 20), 55.0))
    out, _ = stereo_scale(StereoPair(img, img), DisparityMap(np.zeros((6, 20))), 13)
    assert np.all(out.left.data == 55.0)


# --- seam carving ----------------------------------------------------------


def test_seam_carve_widths_and_disparity_preservation():
    pair, dmap = textured_pair(h=10, w=20, shift=3)
    rng = np.random.default_rng(6)
    dm = DisparityMap(dmap.data + rng.uniform(-0.2, 0.2, dmap.shape))
    out, d = stereo_seam_carve(pair, dm, 5)
    assert out.width == d.width == 15
    # surviving disparities keep their original values, row by row
    for i in range(10):
        orig = dm.data[i].tolist()
        for v in d.data[i]:
            orig.remove(v)  # raises if a value was altered


def test_seam_carve_validation():
    pair, dmap = textured_pair(h=10, w=20)
    with pytest.raises(ParameterError):
        stereo_seam_carve(pair, dmap, 18)
    with pytest.raises(ParameterError):
        stereo_seam_carve(pair, dmap, -1)
    out, _ = stereo_seam_carve(pair, dmap, 0)
    assert out.width == 20


def test_seam_carve_removes_flat_region_first():
    rng = np.random.default_rng(13)
    left = rng.random((12, 24)) * 255
    left[:, 8:12] = 128.0  # a flat stripe is the cheapest energy
    pair = StereoPair(GrayImage(left), GrayImage(left))
    out, _ = stereo_seam_carve(pair, DisparityMap(np.zeros((12, 24))), 2)
    # the busy outer columns survive
    assert np.array_equal(out.left.data[:, :7], left[:, :7])
    assert np.array_equal(out.left.data[:, -7:], left[:, -7:])


# --- multi-operator ----------------------------------------------------------


def test_quota_targets_sum_exactly():
    assert sum(_quota_targets([36, 36, 28], 70)) == 70
    assert _quota_targets([10, 10], 14) == [7, 7]
    # equal remainders: the earlier block wins the spare column
    assert _quota_targets([30, 10], 30) == [23, 7]


@given(
    st.lists(st.integers(3, 40), min_size=1, max_size=8),
    st.floats(0.3, 1.0),
)
@settings(max_examples=80, deadline=None)
def test_quota_targets_property(widths, ratio):
    total = sum(widths)
    target = max(1, int(ratio * total))
    targets = _quota_targets(widths, target)
    assert sum(targets) == target
    assert all(0 <= t <= wb for t, wb in zip(targets, widths))


@pytest.mark.parametrize("width, target", [(64, 45), (50, 33), (40, 37), (36, 25)])
def test_multi_operator_hits_exact_width(width, target):
    pair, dmap = textured_pair(h=12, w=width, shift=1)
    out, d = stereo_multi_operator(pair, dmap, target, block_width=16)
    assert out.width == out.left.width == out.right.width == d.width == target


def test_multi_operator_validation():
    pair, dmap = textured_pair(h=12, w=40)
    with pytest.raises(ParameterError):
        stereo_multi_operator(pair, dmap, 30, block_width=2)
    with pytest.raises(ParameterError):
        stereo_multi_operator(pair, dmap, 0)


# --- dispatch ----------------------------------------------------------------


@pytest.mark.parametrize("op", ["crop", "scale", "seam", "multi"])
def test_apply_retarget_dispatch(op):
    pair, dmap = textured_pair(h=12, w=40, shift=2)
    out, d = apply_retarget(pair, dmap, RetargetSpec(28, op))
    assert out.width == d.width == 28


def test_retarget_spec_validation():
    with pytest.raises(ParameterError):
        RetargetSpec(10, "stretch")
    with pytest.raises(ParameterError):
        RetargetSpec(0, "crop")


# --- synthesis ----------------------------------------------------------------


def test_synthetic_comfort_label_shape():
    assert synthetic_comfort_label(0.0) == pytest.approx(3.0)
    xs = np.linspace(-80, 80, 33)
    ys = [synthetic_comfort_label(x) for x in xs]
    assert all(a < b for a, b in zip(ys, ys[1:]))
    assert all(1.0 < y < 5.0 for y in ys)


def test_discover_sources_sorted_and_checked(tmp_path, small_source_dir):
    scenes = discover_sources(small_source_dir)
    assert [s[0] for s in scenes] == sorted(s[0] for s in scenes)
    assert all(disp is not None for _, _, _, disp in scenes)
    with pytest.raises(InputError):
        discover_sources(tmp_path)
    (tmp_path / "solo_left.png").write_bytes((small_source_dir / "scene00_left.png").read_bytes())
    with pytest.raises(InputError):
        discover_sources(tmp_path)


def test_synth_corpus_writes_complete_manifest(tmp_path, small_source_dir):
    out = tmp_path / "corpus"
    rows, failures = synth_corpus(
        small_source_dir, out, ratio=0.7, seed=0, synthetic_mos=True
    )
    assert failures == []
    assert len(rows) == 5 * 5  # source + 4 operators per scene
    methods = {r.method for r in rows}
    assert methods == {"source", "crop", "scale", "seam", "multi"}
    for r in rows:
        assert r.synthetic and 1.0 <= r.mos_vc <= 5.0
        for rel in (r.left_path, r.right_path, r.disparity_path):
            assert not rel.startswith("/")
            assert (out / rel).exists()
    # rows survive a manifest round trip (the CLI writes this file)
    write_manifest(rows, out / "manifest.csv")
    parsed = read_manifest(out / "manifest.csv")
    assert [p.id for p in parsed] == [r.id for r in rows]


def test_synth_corpus_target_widths(tmp_path, small_source_dir):
    from stereocomfort import load_gray

    out = tmp_path / "corpus"
    rows, _ = synth_corpus(small_source_dir, out, ratio=0.7, seed=1)
    for r in rows:
        w = load_gray(out / r.left_path).width
        assert w == (64 if r.method == "source" else 45)


def test_synth_corpus_is_deterministic(tmp_path, small_source_dir):
    a, _ = synth_corpus(small_source_dir, tmp_path / "a", seed=3, synthetic_mos=True)
    b, _ = synth_corpus(small_source_dir, tmp_path / "b", seed=3, synthetic_mos=True)
    assert [(r.id, r.mos_vc) for r in a] == [(r.id, r.mos_vc) for r in b]
    c, _ = synth_corpus(small_source_dir, tmp_path / "c", seed=4, synthetic_mos=True)
    assert [(r.id, r.mos_vc) for r in a] != [(r.id, r.mos_vc) for r in c]


def test_synth_corpus_ratio_validation(tmp_path, small_source_dir):
    with pytest.raises(ParameterError):
        synth_corpus(small_source_dir, tmp_path / "x", ratio=0.0)
    with pytest.raises(ParameterError):
        synth_corpus(small_source_dir, tmp_path / "x", ratio=1.5)


def test_synth_corpus_isolates_scene_failures(tmp_path, small_source_dir):
    src = tmp_path / "src"
    src.mkdir()
    for f in small_source_dir.iterdir():
        (src / f.name).write_bytes(f.read_bytes())
    (src / "scene02_disp.pfm").write_bytes(b"Pf\n64 48\n-1.0\n")  # truncated
    rows, failures = synth_corpus(src, tmp_path / "out", synthetic_mos=True)
    assert len(failures) == 1 and failures[0][0] == "scene02"
    assert len(rows) == 4 * 5


def test_synth_corpus_estimates_missing_disparity(tmp_path, small_source_dir):
    src = tmp_path / "src"
    src.mkdir()
    for f in small_source_dir.iterdir():
        if "scene00" in f.name and not f.name.endswith(".pfm"):
            (src / f.name).write_bytes(f.read_bytes())
    # no map and no estimator: the scene fails in isolation
    rows, failures = synth_corpus(src, tmp_path / "no_est")
    assert rows == [] and len(failures) == 1
    calls = []

    def fake_estimator(pair):
        calls.append(pair.width)
        return DisparityMap(np.zeros((pair.height, pair.width)))

    rows, failures = synth_corpus(
        src, tmp_path / "est", synthetic_mos=True, estimate_missing=fake_estimator
    )
    assert failures == [] and len(rows) == 5 and calls == [64]
