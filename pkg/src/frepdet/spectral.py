"""Orthonormal 2-D Fourier transforms and spectral diagnostics.

Images are ``(h, w, c)`` float arrays; frequency maps interleave real and
imaginary parts so channel ``2k`` / ``2k+1`` belong to source channel ``k``.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, InvalidInputError, RangeError, ShapeError
from .kernels import radial_accumulate
from .reduce import tree_mean

LOG_EPS = 1e-12


def as_image(image, check_range=False):
    """Validate and return ``image`` as a float64 ``(h, w, c)`` array."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"expected an (h, w, c) image, got shape {arr.shape}")
    if arr.shape[2] not in (1, 3):
        raise ShapeError(f"images have 1 or 3 channels, got {arr.shape[2]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("image contains non-finite values")
    if check_range and (arr.min() < -1.0 or arr.max() > 1.0):
        raise InvalidInputError("image values outside [-1, 1]")
    return arr


def forward_fft(image):
    x = as_image(image)
    spec = np.fft.fft2(x, axes=(0, 1), norm="ortho")
    h, w, c = x.shape
    out = np.empty((h, w, 2 * c))
    out[..., 0::2] = spec.real
    out[..., 1::2] = spec.imag
    return out


def to_complex(freq):
    freq = np.asarray(freq, dtype=np.float64)
    if freq.ndim != 3 or freq.shape[2] % 2:
        raise ShapeError(f"frequency map needs an even channel count, got shape {freq.shape}")
    return freq[..., 0::2] + 1j * freq[..., 1::2]


def inverse_fft(freq, check_real=False):
    """Real part of the orthonormal inverse DFT per channel pair.

    With ``check_real`` the discarded imaginary residual must stay below 1e-4,
    which holds whenever ``freq`` came from :func:`forward_fft` of real data.
    """
    spec = to_complex(freq)
    out = np.fft.ifft2(spec, axes=(0, 1), norm="ortho")
    if check_real:
        resid = np.abs(out.imag).max() if out.size else 0.0
        assert resid < 1e-4, f"imaginary residual {resid:.3g}"
    return np.ascontiguousarray(out.real)


def centered_power(image):
    """Channel-averaged ``|X|^2`` with the DC term at ``(h//2, w//2)``."""
    spec = np.fft.fft2(as_image(image), axes=(0, 1), norm="ortho")
    power = (spec.real ** 2 + spec.imag ** 2).mean(axis=2)
    return np.fft.fftshift(power)


def radius_index(h, w):
    """Integer radius of each centred cell, rounded half up."""
    v = np.arange(h) - h // 2
    u = np.arange(w) - w // 2
    r = np.sqrt(v[:, None] ** 2 + u[None, :] ** 2)
    return np.floor(r + 0.5).astype(np.int64)


def max_radius(h, w):
    """Largest bin index (the corner cell)."""
    return int(radius_index(h, w).max())


def nyquist_radius(h, w):
    """Radius of the inscribed circle, ``floor(min(h, w) / 2)``; bins beyond it hold only corner cells."""
    return min(h, w) // 2


@dataclass(frozen=True)
class RadialProfile:
    power: np.ndarray
    counts: np.ndarray
    mode: str = "mean"

    @property
    def radii(self):
        return np.arange(len(self.power))

    @property
    def max_radius(self):
        return len(self.power) - 1

    def total_energy(self):
        if self.mode == "sum":
            return float(self.power.sum())
        return float((self.power * self.counts).sum())


def radial_power_spectrum(image, mode="mean", backend=None):
    """Azimuthal aggregate of the centred power spectrum.

    Bins run from 0 to the corner radius so that every cell is counted.
    ``mode="mean"`` divides each bin by its cell count, ``"sum"`` integrates.
    """
    if mode not in ("mean", "sum"):
        raise ValueError(f"mode must be 'mean' or 'sum', not {mode!r}")
    power = centered_power(image)
    ridx = radius_index(*power.shape)
    nbins = int(ridx.max()) + 1
    sums, counts = radial_accumulate(power, ridx, nbins, backend=backend)
    if mode == "mean":
        sums = sums / np.maximum(counts, 1)
    return RadialProfile(power=sums, counts=counts, mode=mode)


def mean_radial_profile(images, mode="mean", backend=None):
    """Per-bin mean over a dataset of images (order-independent)."""
    images = list(images)
    if not images:
        raise EmptyInputError("no images to profile")
    profiles = [radial_power_spectrum(im, mode=mode, backend=backend) for im in images]
    lengths = {len(p.power) for p in profiles}
    if len(lengths) != 1:
        raise ShapeError("images have different spectral binnings")
    return RadialProfile(
        power=tree_mean([p.power for p in profiles]),
        counts=profiles[0].counts,
        mode=mode,
    )


def log_magnitude_spectrum(image):
    """``log(1 + |X|)`` averaged over channels, DC centred."""
    spec = np.fft.fft2(as_image(image), axes=(0, 1), norm="ortho")
    return np.fft.fftshift(np.log1p(np.abs(spec)).mean(axis=2))


def mean_spectrum_2d(images):
    images = list(images)
    if not images:
        raise EmptyInputError("mean_spectrum_2d needs at least one image")
    shapes = {np.shape(as_image(im)) for im in images}
    if len(shapes) != 1:
        raise ShapeError(f"mixed image shapes: {sorted(shapes)}")
    return tree_mean([log_magnitude_spectrum(im) for im in images])


def _power_of(profile):
    if isinstance(profile, RadialProfile):
        return profile.power
    return np.asarray(profile, dtype=np.float64)


def spectral_gap(a, b, band):
    """Mean absolute log-ratio of two profiles over the inclusive ``band``."""
    pa, pb = _power_of(a), _power_of(b)
    if pa.shape != pb.shape:
        raise ShapeError(f"profiles have different binnings: {pa.shape} vs {pb.shape}")
    lo, hi = band
    if not (0 <= lo <= hi <= len(pa) - 1):
        raise RangeError(f"band {band} outside [0, {len(pa) - 1}]")
    sl = slice(int(lo), int(hi) + 1)
    return float(np.mean(np.abs(np.log(pa[sl] + LOG_EPS) - np.log(pb[sl] + LOG_EPS))))


def top_quartile_band(max_r):
    """The highest quarter of radii ``[ceil(0.75 R), R]``; pass ``nyquist_radius`` for image bands."""
    return int(np.ceil(0.75 * max_r)), int(max_r)


# --------------------------------------------------------------------------
# export formats

def write_profile(profile, path):
    """Write ``radius,power`` lines."""
    power = _power_of(profile)
    lines = [f"{r},{p:.17g}" for r, p in enumerate(power)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile(path):
    rows = [ln.split(",") for ln in Path(path).read_text().splitlines() if ln.strip()]
    return np.array([float(p) for _, p in rows])


def write_grid(values, path):
    """Float grid: ``h w`` header (``h w c`` for multi-channel), then row-major values.

    Multi-channel grids are written channel by channel, one grid after another.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    if arr.ndim == 2:
        header = f"{arr.shape[0]} {arr.shape[1]}"
        planes = [arr]
    elif arr.ndim == 3:
        header = f"{arr.shape[0]} {arr.shape[1]} {arr.shape[2]}"
        planes = [arr[..., k] for k in range(arr.shape[2])]
    else:
        raise ShapeError(f"grid must be 2-D or 3-D, got {arr.shape}")
    lines = [header]
    for plane in planes:
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in plane)
    Path(path).write_text("\n".join(lines) + "\n")


def read_grid(path):
    lines = Path(path).read_text().splitlines()
    dims = [int(t) for t in lines[0].split()]
    vals = np.array([float(t) for ln in lines[1:] for t in ln.split()])
    if len(dims) == 2:
        return vals.reshape(dims)
    h, w, c = dims
    return np.moveaxis(vals.reshape(c, h, w), 0, -1)
