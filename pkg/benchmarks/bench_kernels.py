"""Time the numba and numpy backends of the pixel-loop kernels.

Usage: python3 benchmarks/bench_kernels.py [--sizes 32 256] [--repeat 5]

Both backends are checked for agreement before timing.  The first numba
call (compilation) is excluded; numbers are the best of ``--repeat`` runs.
"""
import argparse
import timeit

import numpy as np

from frepdet import kernels
from frepdet.data import gaussian_taps
from frepdet.spectral import centered_power, radius_index


def cases(size, rng):
    img = rng.uniform(-1, 1, (size, size, 3))
    power = centered_power(img)
    ridx = radius_index(size, size)
    nb = int(ridx.max()) + 1
    th = np.deg2rad(25.0)
    yy, xx = np.meshgrid(np.arange(size, dtype=float), np.arange(size, dtype=float), indexing="ij")
    c = (size - 1) / 2
    ys = c + (yy - c) * np.cos(th) - (xx - c) * np.sin(th)
    xs = c + (yy - c) * np.sin(th) + (xx - c) * np.cos(th)
    taps = gaussian_taps(1.0)
    return {
        "radial_accumulate": lambda b: kernels.radial_accumulate(power, ridx, nb, backend=b),
        "bilinear_sample": lambda b: kernels.bilinear_sample(img, ys, xs, reflect=True, backend=b),
        "conv_axis0": lambda b: kernels.conv_axis0(img, taps, backend=b),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 128, 256])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=20)
    args = p.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'kernel':<20}{'size':>6}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for size in args.sizes:
        for name, fn in cases(size, rng).items():
            a, b = fn("numpy"), fn("numba")
            for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
                np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
            t = {}
            for backend in ("numpy", "numba"):
                runs = timeit.repeat(lambda: fn(backend), repeat=args.repeat, number=args.number)
                t[backend] = 1e3 * min(runs) / args.number
            print(f"{name:<20}{size:>6}{t['numpy']:>12.3f}{t['numba']:>12.3f}{t['numpy'] / t['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
