"""Time the numba and pure-numpy kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly from ``proxauth._kernels`` so a single
run compares them; ``PROXAUTH_DISABLE_NUMBA`` only affects which one the
public API dispatches to.
"""

import argparse
import timeit

import numpy as np

from proxauth import _kernels


def workloads(rng):
    a10, b10 = rng.uniform(-100, -30, 10), rng.uniform(-100, -30, 10)
    rows_a, rows_b = rng.uniform(-100, -30, (10_000, 15)), rng.uniform(-100, -30, (10_000, 15))
    ap_xy = rng.uniform(0, 50, (15, 2))
    p0 = rng.uniform(-50, -30, 15)
    pts = rng.uniform(0, 50, (20_000, 2))
    return {
        "sq_distance (n=10), x1000": (lambda impl: [impl["sq_distance"](a10, b10) for _ in range(1000)]),
        "row_sq_distances 10000x15": (lambda impl: impl["row_sq_distances"](rows_a, rows_b)),
        "mean_rssi_field 15 APs x 20000 pts": (lambda impl: impl["mean_rssi_field"](ap_xy, p0, pts, 2.5)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = {"numpy": _kernels.numpy_impl}
    if _kernels.numba_impl is not None:
        backends["numba"] = _kernels.numba_impl
    else:
        print("numba not importable; timing numpy only")

    for name, fn in workloads(np.random.default_rng(0)).items():
        row = []
        for label, impl in backends.items():
            fn(impl)  # compile / warm caches
            best = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
            row.append(f"{label} {best * 1e3:8.3f} ms")
        print(f"{name:40s} " + "   ".join(row))


if __name__ == "__main__":
    main()
