"""Time the numba and numpy variants of every kernel.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call is excluded (compilation); reported numbers are the
best of ``--repeat`` runs.
"""
import argparse
import timeit

import numpy as np

from gancodec import kernels
from gancodec._accel import HAVE_NUMBA


def cases(rng):
    L = 16
    mids = (np.linspace(-1, 1, L)[1:] + np.linspace(-1, 1, L)[:-1]) / 2
    latent = rng.uniform(-1.2, 1.2, 32 * 64 * 8)  # one 512x1024 image, F=8
    idx = rng.integers(0, L, latent.size)
    packed = kernels.pack_indices_np(idx, 4)
    gt = rng.integers(0, 19, 512 * 1024)
    pred = rng.integers(0, 19, 512 * 1024)
    plane = rng.uniform(0, 255, (512, 1024))
    win = np.exp(-((np.arange(11) - 5) ** 2) / 4.5)
    win /= win.sum()
    return {
        "nearest_level": ((latent, mids), {}),
        "pack_indices": ((idx, 4), {}),
        "unpack_indices": ((packed, 4, idx.size), {}),
        "confusion": ((gt, pred, 19, 255), {}),
        "filter_valid": ((plane, win), {}),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")
    for name, (a, kw) in cases(rng).items():
        f_np = getattr(kernels, name + "_np")
        t_np = min(timeit.repeat(lambda: f_np(*a, **kw), number=1, repeat=args.repeat)) * 1e3
        if HAVE_NUMBA:
            f_nb = getattr(kernels, name + "_nb")
            f_nb(*a, **kw)  # compile
            t_nb = min(timeit.repeat(lambda: f_nb(*a, **kw), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<16}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<16}{t_np:>12.2f}{'n/a':>12}")


if __name__ == "__main__":
    main()
