"""JIT kernels agree with their interpreted originals; env flag honoured."""

import os
import subprocess
import sys

import numpy as np
import pytest

from stereocomfort import NUMBA_ENABLED
from stereocomfort import _kernels
from stereocomfort._accel import python_impl


needs_numba = pytest.mark.skipif(
    not NUMBA_ENABLED, reason="numba backend inactive; nothing to compare"
)


def random_pair(h=14, w=18, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random((h, w)) * 255, rng.random((h, w)) * 255


@needs_numba
def test_window_sad_matches_python():
    left, right = random_pair()
    py = python_impl(_kernels.window_sad)
    for i, j, d in [(0, 0, 0), (5, 9, -3), (13, 17, 4), (7, 2, 12)]:
        assert _kernels.window_sad(left, right, i, j, d, 3) == py(
            left, right, i, j, d, 3
        )


@needs_numba
@pytest.mark.parametrize("subpixel", [False, True])
def test_sad_disparity_matches_python(subpixel):
    left, right = random_pair(seed=1)
    cands = np.array([0, -1, 1, -2, 2, -3, 3], dtype=np.int64)
    jit = _kernels.sad_disparity(left, right, 2, cands, -3, 3, subpixel)
    py = python_impl(_kernels.sad_disparity)(left, right, 2, cands, -3, 3, subpixel)
    assert np.array_equal(jit, py)


@needs_numba
def test_min_vertical_seam_matches_python():
    rng = np.random.default_rng(2)
    for trial in range(10):
        energy = rng.random((10 + trial, 8 + trial))
        jit = _kernels.min_vertical_seam(energy)
        py = python_impl(_kernels.min_vertical_seam)(energy)
        assert np.array_equal(jit, py)


@needs_numba
def test_smo_matches_python():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(12, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 0.3 * rng.normal(size=12)
    K = np.exp(-0.5 * np.sum((X[:, None] - X[None]) ** 2, axis=2))
    jit = _kernels.smo_epsilon_svr(K, y, 10.0, 0.1, 1e-4, 100000)
    py = python_impl(_kernels.smo_epsilon_svr)(K, y, 10.0, 0.1, 1e-4, 100000)
    assert np.array_equal(jit[0], py[0])  # beta
    assert jit[1:] == py[1:]  # bias, alpha total, iterations, violation


def test_smo_iterates_stay_feasible():
    rng = np.random.default_rng(4)
    for trial in range(5):
        n = 4 + trial
        X = rng.normal(size=(n, 2))
        y = rng.normal(size=n)
        K = X @ X.T + np.eye(n)
        C = [0.5, 10.0][trial % 2]
        beta, bias, alpha_total, it, viol = _kernels.smo_epsilon_svr(
            K, y, C, 0.05, 1e-5, 100000
        )
        assert viol <= 1e-5
        assert np.all(np.abs(beta) <= C + 1e-12)
        assert abs(beta.sum()) <= 1e-9  # equality constraint
        assert alpha_total >= np.abs(beta).sum() - 1e-9


def test_seam_output_is_monotone_8_connected():
    rng = np.random.default_rng(5)
    for _ in range(20):
        energy = rng.random((12, 9))
        seam = _kernels.min_vertical_seam(energy)
        assert seam.shape == (12,)
        assert np.all((seam >= 0) & (seam < 9))
        assert np.all(np.abs(np.diff(seam)) <= 1)


@pytest.mark.parametrize("flag, expect", [("0", "False"), ("off", "False"), ("auto", "True")])
def test_env_flag_selects_backend(flag, expect):
    code = (
        "from stereocomfort import NUMBA_ENABLED, disparity_range_feature, DisparityMap\n"
        "import numpy as np\n"
        "print(NUMBA_ENABLED, disparity_range_feature(DisparityMap(np.array([[-79.55, 79.55]]))))\n"
    )
    env = dict(os.environ, STEREOCOMFORT_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    got_flag, got_value = out.stdout.split()
    assert got_flag == expect
    assert abs(float(got_value)) < 1e-9


def test_pure_python_backend_runs_pipeline():
    code = (
        "import numpy as np\n"
        "from stereocomfort import _kernels\n"
        "assert not hasattr(_kernels.min_vertical_seam, 'py_func')\n"
        "seam = _kernels.min_vertical_seam(np.ones((3, 4)))\n"
        "assert seam.tolist() == [0, 0, 0]\n"
    )
    env = dict(os.environ, STEREOCOMFORT_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
