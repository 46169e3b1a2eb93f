"""Both kernel backends must agree; the env flag must select the numpy one."""

import os
import subprocess
import sys

import numpy as np
import pytest

from proxauth import _kernels

needs_numba = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba not importable")


@needs_numba
def test_sq_distance_backends_agree():
    rng = np.random.default_rng(0)
    for n in (1, 3, 10, 20, 64):
        a, b = rng.uniform(-100, -30, n), rng.uniform(-100, -30, n)
        assert _kernels.numba_impl["sq_distance"](a, b) == pytest.approx(
            _kernels.numpy_impl["sq_distance"](a, b), rel=1e-12)


@needs_numba
def test_row_distances_backends_agree():
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-100, -30, (200, 17)), rng.uniform(-100, -30, (200, 17))
    np.testing.assert_allclose(_kernels.numba_impl["row_sq_distances"](a, b),
                               _kernels.numpy_impl["row_sq_distances"](a, b), rtol=1e-12)


@needs_numba
def test_mean_field_backends_agree():
    rng = np.random.default_rng(2)
    ap_xy = rng.uniform(0, 50, (15, 2))
    p0 = np.full(15, -40.0)
    pts = np.vstack([rng.uniform(0, 50, (100, 2)), ap_xy[:3] + 0.1])
    np.testing.assert_allclose(_kernels.numba_impl["mean_rssi_field"](ap_xy, p0, pts, 2.5),
                               _kernels.numpy_impl["mean_rssi_field"](ap_xy, p0, pts, 2.5), rtol=0, atol=1e-10)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        _kernels.row_sq_distances(np.zeros((2, 3)), np.zeros((3, 2)))


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", None)])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, PROXAUTH_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import proxauth; print(proxauth.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    if expected is None:
        expected = "numba" if _kernels.numba_impl is not None else "numpy"
    assert out == expected
