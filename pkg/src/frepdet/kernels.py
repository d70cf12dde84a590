"""Pixel-loop kernels with a numba path and a pure-numpy path.

Each public function dispatches on ``backend`` ("numba", "numpy" or None for
the process default from :mod:`frepdet._accel`). Both paths must agree to
within float64 rounding; ``tests/test_kernels.py`` holds them to 1e-12.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


def _pick(backend):
    if backend is None:
        return "numba" if USE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


# --------------------------------------------------------------------------
# radial accumulation

@njit(cache=True)
def _radial_accumulate_nb(power, radius_idx, nbins):
    sums = np.zeros(nbins)
    counts = np.zeros(nbins, dtype=np.int64)
    h, w = power.shape
    for i in range(h):
        for j in range(w):
            r = radius_idx[i, j]
            sums[r] += power[i, j]
            counts[r] += 1
    return sums, counts


def _radial_accumulate_np(power, radius_idx, nbins):
    flat = radius_idx.ravel()
    sums = np.bincount(flat, weights=power.ravel(), minlength=nbins)
    counts = np.bincount(flat, minlength=nbins).astype(np.int64)
    return sums, counts


def radial_accumulate(power, radius_idx, nbins, backend=None):
    """Sum ``power`` into integer bins given per-cell bin indices."""
    power = np.ascontiguousarray(power, dtype=np.float64)
    radius_idx = np.ascontiguousarray(radius_idx, dtype=np.int64)
    if _pick(backend) == "numba":
        return _radial_accumulate_nb(power, radius_idx, nbins)
    return _radial_accumulate_np(power, radius_idx, nbins)


# --------------------------------------------------------------------------
# coordinate folding

@njit(cache=True)
def _reflect_coord(x, n):
    # mirror about the first/last sample centre, period 2(n-1)
    if n == 1:
        return 0.0
    period = 2.0 * (n - 1)
    x = abs(x) % period
    if x > n - 1:
        x = period - x
    return x


def _reflect_coord_np(x, n):
    if n == 1:
        return np.zeros_like(x)
    period = 2.0 * (n - 1)
    x = np.abs(x) % period
    return np.where(x > n - 1, period - x, x)


@njit(cache=True)
def _reflect_index(i, n):
    if n == 1:
        return 0
    period = 2 * (n - 1)
    i = abs(i) % period
    if i > n - 1:
        i = period - i
    return i


def _reflect_index_np(i, n):
    if n == 1:
        return np.zeros_like(i)
    period = 2 * (n - 1)
    i = np.abs(i) % period
    return np.where(i > n - 1, period - i, i)


# --------------------------------------------------------------------------
# bilinear sampling

@njit(cache=True)
def _bilinear_nb(img, ys, xs, reflect):
    h, w, c = img.shape
    oh, ow = ys.shape
    out = np.empty((oh, ow, c))
    for i in range(oh):
        for j in range(ow):
            y = ys[i, j]
            x = xs[i, j]
            if reflect:
                y = _reflect_coord(y, h)
                x = _reflect_coord(x, w)
            else:
                y = min(max(y, 0.0), h - 1.0)
                x = min(max(x, 0.0), w - 1.0)
            y0 = int(np.floor(y))
            x0 = int(np.floor(x))
            y1 = min(y0 + 1, h - 1)
            x1 = min(x0 + 1, w - 1)
            fy = y - y0
            fx = x - x0
            for k in range(c):
                top = img[y0, x0, k] * (1.0 - fx) + img[y0, x1, k] * fx
                bot = img[y1, x0, k] * (1.0 - fx) + img[y1, x1, k] * fx
                out[i, j, k] = top * (1.0 - fy) + bot * fy
    return out


def _bilinear_np(img, ys, xs, reflect):
    h, w, _ = img.shape
    if reflect:
        y = _reflect_coord_np(ys, h)
        x = _reflect_coord_np(xs, w)
    else:
        y = np.clip(ys, 0.0, h - 1.0)
        x = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(y).astype(np.int64)
    x0 = np.floor(x).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (y - y0)[..., None]
    fx = (x - x0)[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def bilinear_sample(img, ys, xs, reflect=False, backend=None):
    """Sample an h*w*c image at fractional (ys, xs) source coordinates.

    Out-of-range coordinates are clamped to the border, or mirrored when
    ``reflect`` is set.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if _pick(backend) == "numba":
        return _bilinear_nb(img, ys, xs, reflect)
    return _bilinear_np(img, ys, xs, reflect)


# --------------------------------------------------------------------------
# separable convolution along one axis, reflect padding

@njit(cache=True)
def _conv_axis0_nb(img, taps):
    h, w, c = img.shape
    radius = (taps.shape[0] - 1) // 2
    out = np.zeros((h, w, c))
    for i in range(h):
        for t in range(taps.shape[0]):
            src = _reflect_index(i + t - radius, h)
            wt = taps[t]
            for j in range(w):
                for k in range(c):
                    out[i, j, k] += wt * img[src, j, k]
    return out


def _conv_axis0_np(img, taps):
    h = img.shape[0]
    radius = (taps.shape[0] - 1) // 2
    out = np.zeros(img.shape)
    rows = np.arange(h)
    for t in range(taps.shape[0]):
        src = _reflect_index_np(rows + t - radius, h)
        out += taps[t] * img[src]
    return out


def conv_axis0(img, taps, backend=None):
    """Correlate ``img`` (h*w*c) with 1-D ``taps`` along rows, mirrored edges."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    if _pick(backend) == "numba":
        return _conv_axis0_nb(img, taps)
    return _conv_axis0_np(img, taps)
