"""Numeric inner loops.

Each kernel has a numba ``@njit`` implementation and a pure-numpy one. The
numba path is used when numba imports cleanly and ``PROXAUTH_DISABLE_NUMBA``
is unset (or ``0``). Both paths sum squared differences left to right, but the
numpy path may differ from the jitted one in the last ulp because numpy uses
pairwise summation on long rows.
"""

import os

import numpy as np

__all__ = [
    "BACKEND",
    "NUMBA_ENABLED",
    "mean_rssi_field",
    "row_sq_distances",
    "sq_distance",
    "numpy_impl",
    "numba_impl",
]


def _flag_disabled():
    return os.environ.get("PROXAUTH_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------

def _sq_distance_np(a, b):
    diff = a - b
    return float(np.dot(diff, diff))


def _row_sq_distances_np(a, b):
    diff = a - b
    return np.einsum("ij,ij->i", diff, diff)


def _mean_rssi_field_np(ap_xy, p0, points, exponent):
    # (k, m) distances, clamped to the 1 m reference distance
    dx = points[:, 0:1] - ap_xy[None, :, 0]
    dy = points[:, 1:2] - ap_xy[None, :, 1]
    d = np.maximum(np.sqrt(dx * dx + dy * dy), 1.0)
    return p0[None, :] - 10.0 * exponent * np.log10(d)


numpy_impl = {
    "sq_distance": _sq_distance_np,
    "row_sq_distances": _row_sq_distances_np,
    "mean_rssi_field": _mean_rssi_field_np,
}


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

numba_impl = None
try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

if njit is not None:

    @njit(cache=True)
    def _sq_distance_nb(a, b):
        acc = 0.0
        for i in range(a.shape[0]):
            d = a[i] - b[i]
            acc += d * d
        return acc

    @njit(cache=True)
    def _row_sq_distances_nb(a, b):
        k, n = a.shape
        out = np.empty(k)
        for r in range(k):
            acc = 0.0
            for i in range(n):
                d = a[r, i] - b[r, i]
                acc += d * d
            out[r] = acc
        return out

    @njit(cache=True)
    def _mean_rssi_field_nb(ap_xy, p0, points, exponent):
        k = points.shape[0]
        m = ap_xy.shape[0]
        out = np.empty((k, m))
        for r in range(k):
            px = points[r, 0]
            py = points[r, 1]
            for j in range(m):
                dx = px - ap_xy[j, 0]
                dy = py - ap_xy[j, 1]
                d = np.sqrt(dx * dx + dy * dy)
                if d < 1.0:
                    d = 1.0
                out[r, j] = p0[j] - 10.0 * exponent * np.log10(d)
        return out

    numba_impl = {
        "sq_distance": lambda a, b: float(_sq_distance_nb(a, b)),
        "row_sq_distances": _row_sq_distances_nb,
        "mean_rssi_field": _mean_rssi_field_nb,
    }


NUMBA_ENABLED = numba_impl is not None and not _flag_disabled()
BACKEND = "numba" if NUMBA_ENABLED else "numpy"
_impl = numba_impl if NUMBA_ENABLED else numpy_impl


def sq_distance(a, b):
    """Sum of squared differences of two equal-length float64 vectors."""
    return _impl["sq_distance"](
        np.ascontiguousarray(a, dtype=np.float64), np.ascontiguousarray(b, dtype=np.float64)
    )


def row_sq_distances(a, b):
    """Row-wise sum of squared differences of two (k, n) float64 matrices."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return _impl["row_sq_distances"](a, b)


def mean_rssi_field(ap_xy, p0, points, exponent):
    """Noise-free log-distance RSSI for every (point, AP) pair, shape (k, m)."""
    return _impl["mean_rssi_field"](
        np.ascontiguousarray(ap_xy, dtype=np.float64),
        np.ascontiguousarray(p0, dtype=np.float64),
        np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2),
        float(exponent),
    )
