"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both paths run in one process (the numpy versions are always importable).
The first numba call is a warm-up so compilation is not timed.
"""

import argparse
import timeit

import numpy as np

from nssaddle import _accel
from nssaddle.rng import substream


def two_point_args(d, n_funcs, m):
    r = np.random.default_rng(0)
    return (r.standard_normal(d), r.standard_normal((n_funcs, d)), 0.5, r.standard_normal(d),
            r.standard_normal(n_funcs), 1e-3, m, 0.5, True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        print("numba unavailable (or disabled); only the numpy path can be timed")

    cases = [
        ("two_point d=2 funcs=1 m=64", "two_point", two_point_args(2, 1, 64)),
        ("two_point d=2 funcs=256 m=24", "two_point", two_point_args(2, 256, 24)),
        ("two_point d=4 funcs=1 m=20000", "two_point", two_point_args(4, 1, 20_000)),
        ("prefix_mean 4096x4", "prefix", (np.random.default_rng(1).standard_normal((4096, 4)),)),
    ]
    print(f"{'case':34s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, kind, a in cases:
        if kind == "two_point":
            np_fn = lambda: _accel._two_point_sum_np(substream(0), *a)  # noqa: E731
            nb_fn = (lambda: _accel._two_point_sum_nb(substream(0), *a)) if _accel.HAVE_NUMBA else None  # noqa: E731
        else:
            np_fn = lambda: _accel._kahan_prefix_mean_np(*a)  # noqa: E731
            nb_fn = (lambda: _accel._kahan_prefix_mean_nb(*a)) if _accel.HAVE_NUMBA else None  # noqa: E731
        t_np = min(timeit.repeat(np_fn, number=1, repeat=args.repeat)) * 1e3
        if nb_fn is None:
            print(f"{name:34s} {t_np:10.3f} {'-':>10s} {'-':>8s}")
            continue
        nb_fn()
        t_nb = min(timeit.repeat(nb_fn, number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
