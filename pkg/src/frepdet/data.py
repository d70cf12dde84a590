"""Datasets, the synthetic-artifact toy generator, manipulations and resizing."""
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, InvalidDatasetError, LayoutError
from .kernels import bilinear_sample, conv_axis0
from .spectral import as_image

REAL, FAKE = 0, 1
IMAGE_EXTENSIONS = (".png", ".ppm")
FAMILIES = ("checkerboard", "ring", "grid", "none")
BASE_PEAK = 0.7


@dataclass(frozen=True)
class LabeledImage:
    image: np.ndarray
    label: int
    source_tag: str = ""

    def __post_init__(self):
        if self.label not in (REAL, FAKE):
            raise ConfigError(f"label must be 0 or 1, got {self.label}")


# --------------------------------------------------------------------------
# pixel <-> 8-bit

def from_uint8(arr):
    """Exact affine map of 8-bit values to [-1, 1]: ``v / 127.5 - 1``."""
    return np.asarray(arr, dtype=np.float64) / 127.5 - 1.0


def to_uint8(image):
    x = np.clip(np.asarray(image, dtype=np.float64), -1.0, 1.0)
    return np.rint((x + 1.0) * 127.5).astype(np.uint8)


def quantize(image):
    """Snap values onto the 8-bit grid so a PNG roundtrip is lossless."""
    return from_uint8(to_uint8(image))


def read_image(path):
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    if arr.ndim == 2:
        arr = arr[..., None]
    return from_uint8(arr)


def write_image(image, path):
    u8 = to_uint8(as_image(image))
    mode = "L" if u8.shape[2] == 1 else "RGB"
    Image.fromarray(u8[..., 0] if mode == "L" else u8, mode=mode).save(path)


# --------------------------------------------------------------------------
# loading

def _match_channels(image, channels):
    if channels is None or image.shape[2] == channels:
        return image
    if channels == 3 and image.shape[2] == 1:
        return np.repeat(image, 3, axis=2)
    if channels == 1 and image.shape[2] == 3:
        return image.mean(axis=2, keepdims=True)
    raise ConfigError(f"cannot convert {image.shape[2]} channels to {channels}")


def _image_files(folder):
    return sorted(p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)


def load_dataset(root_dir, image_size, channels=None):
    """Read ``root/real`` (label 0) then ``root/fake`` (label 1), lexicographic order."""
    root = Path(root_dir)
    for name in ("real", "fake"):
        if not (root / name).is_dir():
            raise LayoutError(f"missing subfolder {root / name}")
    items = []
    for label, name in ((REAL, "real"), (FAKE, "fake")):
        folder = root / name
        count = 0
        for path in _image_files(folder):
            try:
                img = read_image(path)
            except Exception as exc:  # undecodable files are skipped, not fatal
                warnings.warn(f"skipping {path}: {exc}")
                continue
            img = _match_channels(img, channels)
            if image_size is not None and img.shape[:2] != (image_size, image_size):
                img = resize(img, image_size)
            items.append(LabeledImage(img, label, name))
            count += 1
        if count == 0:
            raise InvalidDatasetError(f"no decodable images in {folder}")
    return items


def save_dataset(items, root_dir):
    """Write items as PNGs under ``root/{real,fake}``; returns written paths."""
    root = Path(root_dir)
    paths = []
    for name in ("real", "fake"):
        (root / name).mkdir(parents=True, exist_ok=True)
    for i, item in enumerate(items):
        sub = "real" if item.label == REAL else "fake"
        tag = item.source_tag or sub
        path = root / sub / f"{i:06d}_{tag}.png"
        write_image(item.image, path)
        paths.append(path)
    return paths


def require_both_classes(items):
    labels = {it.label for it in items}
    if labels != {REAL, FAKE}:
        raise InvalidDatasetError("dataset needs at least one real and one fake image")


def split_holdout(items, fraction, seed):
    """Stratified deterministic split into (train, held_out)."""
    rng = np.random.default_rng([seed, 0x5EED])
    train, held = [], []
    for label in (REAL, FAKE):
        idx = [i for i, it in enumerate(items) if it.label == label]
        order = rng.permutation(len(idx))
        n_held = int(round(fraction * len(idx)))
        held_set = {idx[k] for k in order[:n_held]}
        for i in idx:
            (held if i in held_set else train).append(i)
    return [items[i] for i in sorted(train)], [items[i] for i in sorted(held)]


# --------------------------------------------------------------------------
# synthetic artifacts

@dataclass(frozen=True)
class SyntheticArtifactSpec:
    family: str = "none"
    amplitude: float = 0.0
    radial_band: tuple = None
    period: int = 2
    base_texture_seed: int = 0

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown artifact family {self.family!r}")
        if self.amplitude < 0:
            raise ConfigError("amplitude must be >= 0")
        if self.period < 2:
            raise ConfigError("period must be >= 2")
        if self.radial_band is not None:
            lo, hi = self.radial_band
            if not 0 <= lo <= hi:
                raise ConfigError(f"bad radial band {self.radial_band}")
        return self

    def band_for(self, size):
        return tuple(self.radial_band) if self.radial_band is not None else (size / 4, 3 * size / 8)


def _freq_radius(size):
    f = np.fft.fftfreq(size) * size
    return np.sqrt(f[:, None] ** 2 + f[None, :] ** 2)


def _peak_normalize(x):
    peak = np.abs(x).max()
    return x / peak if peak > 0 else x


def smooth_texture(rng, size, channels):
    """White noise through a first-order Butterworth low-pass, cutoff radius size/8.

    Above the cutoff the power falls off as 1/f^2, like natural images.
    """
    noise = rng.standard_normal((size, size, channels))
    transfer = 1.0 / np.sqrt(1.0 + (_freq_radius(size) / (size / 8)) ** 2)
    spec = np.fft.fft2(noise, axes=(0, 1)) * transfer[..., None]
    tex = np.fft.ifft2(spec, axes=(0, 1)).real
    return BASE_PEAK * _peak_normalize(tex)


def artifact_pattern(spec, size, channels, rng):
    """Unit-peak artifact for ``spec.family``; multiply by the amplitude."""
    if spec.family == "none":
        return np.zeros((size, size, channels))
    if spec.family == "checkerboard":
        # one live sample per period x period block: the zero-insertion upsampling trace
        i = np.arange(size)
        live = (i % spec.period == 0).astype(np.float64)
        pat = np.outer(live, live)
        pat = _peak_normalize(pat - pat.mean())
    elif spec.family == "grid":
        i = np.arange(size)
        line = i % spec.period == 0
        pat = (line[:, None] | line[None, :]).astype(np.float64)
        pat = _peak_normalize(pat - pat.mean())
    else:  # ring
        lo, hi = spec.band_for(size)
        r = _freq_radius(size)
        mask = (r >= lo) & (r <= hi)
        noise = rng.standard_normal((size, size))
        pat = np.fft.ifft2(np.fft.fft2(noise) * mask).real
        pat = _peak_normalize(pat)
    return np.repeat(pat[..., None], channels, axis=2)


def synthesize_image(spec, size, channels, seed, label, index):
    """One toy image; depends only on its own (seed, label, index) key."""
    rng = np.random.default_rng([seed, spec.base_texture_seed, label, index])
    x = smooth_texture(rng, size, channels)
    if spec.family != "none" and spec.amplitude > 0:
        x = x + spec.amplitude * artifact_pattern(spec, size, channels, rng)
    return quantize(np.clip(x, -1.0, 1.0))


def synthesize_toy_dataset(spec_real, spec_fake, n_per_class, size, seed, channels=3):
    """Real images are bare smooth textures; fakes add ``spec_fake``'s artifact."""
    spec_real = spec_real.validate()
    spec_fake = spec_fake.validate()
    if spec_real.family != "none":
        raise ConfigError("real images must use family 'none'")
    if n_per_class < 1:
        raise ConfigError("n_per_class must be >= 1")
    if size < 8:
        raise ConfigError("size must be >= 8")
    items = [LabeledImage(synthesize_image(spec_real, size, channels, seed, REAL, i), REAL, "none")
             for i in range(n_per_class)]
    items += [LabeledImage(synthesize_image(spec_fake, size, channels, seed, FAKE, i), FAKE, spec_fake.family)
              for i in range(n_per_class)]
    return items


# --------------------------------------------------------------------------
# resizing

def resize(image, target_size, backend=None):
    """Bilinear resize with half-pixel-centred sampling and clamped edges."""
    x = as_image(image)
    th, tw = (target_size, target_size) if np.isscalar(target_size) else target_size
    th, tw = int(th), int(tw)
    if th < 8 or tw < 8:
        raise ConfigError(f"target size must be >= 8, got {(th, tw)}")
    h, w, _ = x.shape
    if (th, tw) == (h, w):
        return x.copy()
    ys = (np.arange(th) + 0.5) * (h / th) - 0.5
    xs = (np.arange(tw) + 0.5) * (w / tw) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(x, yy, xx, reflect=False, backend=backend)


# --------------------------------------------------------------------------
# manipulations

MANIPULATIONS = {
    # kind: (identity, legal range)
    "hue": (0.0, (-0.5, 0.5)),
    "brightness": (0.0, (-0.5, 0.5)),
    "saturation": (1.0, (0.0, 2.0)),
    "gamma": (1.0, (0.25, 4.0)),
    "contrast": (1.0, (0.0, 2.0)),
    "blur": (0.0, (0.0, 4.0)),
    "rotation": (0.0, (-360.0, 360.0)),
}
SUITE_DEFAULTS = {"hue": 0.1, "brightness": 0.2, "saturation": 1.5, "gamma": 1.5,
                  "contrast": 1.5, "blur": 1.0, "rotation": 25.0}
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class ManipulationSpec:
    kind: str
    magnitude: float

    def validate(self):
        if self.kind not in MANIPULATIONS:
            raise ConfigError(f"unknown manipulation {self.kind!r}")
        lo, hi = MANIPULATIONS[self.kind][1]
        if not lo <= self.magnitude <= hi:
            raise ConfigError(f"{self.kind} magnitude {self.magnitude} outside [{lo}, {hi}]")
        return self

    @property
    def is_identity(self):
        return self.magnitude == MANIPULATIONS[self.kind][0]


def rgb_to_hsv(rgb):
    """Vectorised RGB -> HSV, all components in [0, 1]."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    rc, gc, bc = (maxc - r) / safe, (maxc - g) / safe, (maxc - b) / safe
    h = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, maxc], axis=-1)


def hsv_to_rgb(hsv):
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    i = i.astype(np.int64) % 6
    choices = [np.stack(c, axis=-1) for c in
               ((v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q))]
    out = np.zeros(hsv.shape)
    for k, c in enumerate(choices):
        out = np.where((i == k)[..., None], c, out)
    return out


def gaussian_taps(sigma):
    radius = int(np.ceil(3 * sigma))
    t = np.arange(-radius, radius + 1)
    taps = np.exp(-0.5 * (t / sigma) ** 2)
    return taps / taps.sum()


def gaussian_blur(x, sigma, backend=None):
    taps = gaussian_taps(sigma)
    y = conv_axis0(x, taps, backend=backend)
    return conv_axis0(y.transpose(1, 0, 2), taps, backend=backend).transpose(1, 0, 2)


def rotate(x, degrees, backend=None):
    """Counter-clockwise rotation; quarter turns are exact, others bilinear + mirrored edges."""
    quarter = degrees / 90.0
    if quarter == int(quarter):
        return np.ascontiguousarray(np.rot90(x, k=int(quarter) % 4, axes=(0, 1)))
    h, w, _ = x.shape
    th = np.deg2rad(degrees)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    dy, dx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    ys = cy + np.cos(th) * dy + np.sin(th) * dx
    xs = cx - np.sin(th) * dy + np.cos(th) * dx
    return bilinear_sample(x, ys, xs, reflect=True, backend=backend)


def manipulate(image, spec, backend=None):
    spec = spec.validate()
    x = as_image(image)
    if spec.is_identity:
        return x.copy()
    m = spec.magnitude
    kind = spec.kind
    if kind == "brightness":
        out = x + m
    elif kind == "gamma":
        out = ((x + 1.0) / 2.0) ** m * 2.0 - 1.0
    elif kind == "contrast":
        mean = x.mean()
        out = mean + m * (x - mean)
    elif kind == "saturation":
        if x.shape[2] == 1:
            return x.copy()
        gray = (x @ LUMA)[..., None]
        out = gray + m * (x - gray)
    elif kind == "hue":
        if x.shape[2] == 1:
            return x.copy()
        hsv = rgb_to_hsv((x + 1.0) / 2.0)
        hsv[..., 0] = (hsv[..., 0] + m) % 1.0
        out = hsv_to_rgb(hsv) * 2.0 - 1.0
    elif kind == "blur":
        out = gaussian_blur(x, m, backend=backend)
    else:
        out = rotate(x, m, backend=backend)
    return np.clip(out, -1.0, 1.0)
