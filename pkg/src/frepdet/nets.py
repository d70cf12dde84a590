"""Network architectures and the descriptors that rebuild them.

A descriptor is a plain JSON-able dict: ``{"kind", "preset", "size",
"channels", ...}``. ``build(descriptor)`` must return the same architecture on
every call so checkpoints can be restored from the descriptor alone.
"""
import copy

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, ShapeError

TOY_ACT = nn.SiLU


def _check_input(x, shape):
    h, w, c = shape
    if x.ndim != 4 or tuple(x.shape[1:]) != (c, h, w):
        raise ShapeError(f"expected input (N, {c}, {h}, {w}), got {tuple(x.shape)}")


# --------------------------------------------------------------------------
# frequency-level generator H

class FreqEncoderDecoder(nn.Module):
    """Two stride-2 downsamplings, two stride-2 upsamplings, linear output.

    With ``coord`` the normalised signed frequency of each cell is appended
    as two extra input channels; convolutions alone cannot tell which
    frequency a cell holds.
    """

    def __init__(self, channels, widths=(16, 32), coord=True, zero_init_output=True):
        super().__init__()
        w1, w2 = widths
        self.coord = coord
        fin = channels + (2 if coord else 0)
        self.down1 = nn.Conv2d(fin, w1, 4, stride=2, padding=1)
        self.down2 = nn.Conv2d(w1, w2, 4, stride=2, padding=1)
        self.up1 = nn.ConvTranspose2d(w2, w1, 4, stride=2, padding=1)
        self.up2 = nn.ConvTranspose2d(w1, channels, 4, stride=2, padding=1)
        self.act = TOY_ACT()
        if zero_init_output:
            nn.init.zeros_(self.up2.weight)
            nn.init.zeros_(self.up2.bias)

    def forward(self, z):
        if self.coord:
            z = torch.cat([z, frequency_coords(z)], dim=1)
        out = self.act(self.down1(z))
        out = self.act(self.down2(out))
        out = self.act(self.up1(out))
        out = self.up2(out)
        return out


class VGGEncoderDecoder(nn.Module):
    """VGG-style blocks (two 3x3 convs + pool) mirrored by an upsampling decoder."""

    def __init__(self, channels, widths=(64, 128, 256), coord=True, zero_init_output=True):
        super().__init__()
        self.coord = coord
        fin = channels + (2 if coord else 0)
        enc, prev = [], fin
        for wd in widths:
            enc.append(nn.Sequential(
                nn.Conv2d(prev, wd, 3, padding=1), nn.ReLU(),
                nn.Conv2d(wd, wd, 3, padding=1), nn.ReLU(),
            ))
            prev = wd
        self.enc = nn.ModuleList(enc)
        dec = []
        for wd in reversed(widths[:-1]):
            dec.append(nn.Sequential(
                nn.Conv2d(prev, wd, 3, padding=1), nn.ReLU(),
                nn.Conv2d(wd, wd, 3, padding=1), nn.ReLU(),
            ))
            prev = wd
        self.dec = nn.ModuleList(dec)
        self.out = nn.Conv2d(prev, channels, 1)
        if zero_init_output:
            nn.init.zeros_(self.out.weight)
            nn.init.zeros_(self.out.bias)

    def forward(self, z):
        if self.coord:
            z = torch.cat([z, frequency_coords(z)], dim=1)
        for i, block in enumerate(self.enc):
            if i:
                z = F.max_pool2d(z, 2)
            z = block(z)
        for block in self.dec:
            z = F.interpolate(z, scale_factor=2, mode="nearest")
            z = block(z)
        return self.out(z)


def frequency_coords(z):
    """Two channels with the signed DFT frequency (cycles/sample) of each cell."""
    n, _, h, w = z.shape
    fy = torch.fft.fftfreq(h, dtype=z.dtype, device=z.device)
    fx = torch.fft.fftfreq(w, dtype=z.dtype, device=z.device)
    grid = torch.stack(torch.meshgrid(fy, fx, indexing="ij"))
    return grid.unsqueeze(0).expand(n, -1, -1, -1)


class FrequencyGenerator(nn.Module):
    """Perturbation generator: FFT, frequency-level network ``H``, inverse FFT.

    ``H`` sees the interleaved real/imaginary map of shape ``(N, 2c, h, w)``.
    """

    def __init__(self, H, image_shape, standardize=False, descriptor=None):
        super().__init__()
        self.H = H
        self.image_shape = tuple(image_shape)
        self.standardize = standardize
        self.descriptor = descriptor

    def forward(self, x):
        _check_input(x, self.image_shape)
        n, c, h, w = x.shape
        spec = torch.fft.fft2(x, norm="ortho")
        freq = torch.stack([spec.real, spec.imag], dim=2).reshape(n, 2 * c, h, w)
        if self.standardize:
            mu = freq.mean(dim=(2, 3), keepdim=True)
            sd = freq.std(dim=(2, 3), keepdim=True) + 1e-6
            z = self.H((freq - mu) / sd) * sd + mu
        else:
            z = self.H(freq)
        z = z.reshape(n, c, 2, h, w)
        out = torch.fft.ifft2(torch.complex(z[:, :, 0], z[:, :, 1]), norm="ortho")
        return out.real


class PixelGenerator(nn.Module):
    """Ablation: the same encoder-decoder applied directly to pixels."""

    def __init__(self, H, image_shape, descriptor=None):
        super().__init__()
        self.H = H
        self.image_shape = tuple(image_shape)
        self.descriptor = descriptor

    def forward(self, x):
        _check_input(x, self.image_shape)
        return self.H(x)


# --------------------------------------------------------------------------
# discriminator / classifier

class ConvBinary(nn.Module):
    """Strided conv stack, global average pool, linear logit.

    ``forward`` returns the probability; ``logit`` the pre-sigmoid score.
    """

    def __init__(self, image_shape, layers, act="silu", batchnorm=False, descriptor=None):
        super().__init__()
        self.image_shape = tuple(image_shape)
        self.descriptor = descriptor
        c = self.image_shape[2]
        mods, prev = [], c
        for width, kernel, stride in layers:
            mods.append(nn.Conv2d(prev, width, kernel, stride=stride, padding=(kernel - 1) // 2))
            if batchnorm:
                mods.append(nn.BatchNorm2d(width))
            mods.append(TOY_ACT() if act == "silu" else nn.LeakyReLU(0.2))
            prev = width
        self.features = nn.Sequential(*mods)
        self.head = nn.Linear(prev, 1)

    def logit(self, x):
        _check_input(x, self.image_shape)
        z = self.features(x).mean(dim=(2, 3))
        return self.head(z).squeeze(1)

    def forward(self, x):
        return torch.sigmoid(self.logit(x))


class ResNetBinary(nn.Module):
    def __init__(self, image_shape, descriptor=None):
        super().__init__()
        from torchvision.models import resnet50

        self.image_shape = tuple(image_shape)
        self.descriptor = descriptor
        self.net = resnet50(weights=None, num_classes=1)

    def logit(self, x):
        _check_input(x, self.image_shape)
        if x.shape[1] == 1:
            x = x.expand(-1, 3, -1, -1)
        return self.net(x).squeeze(1)

    def forward(self, x):
        return torch.sigmoid(self.logit(x))


# --------------------------------------------------------------------------
# descriptors

GENERATOR_PRESETS = {
    "toy": {"widths": [16, 32]},
    "tiny": {"widths": [4, 8]},
    "vgg": {"widths": [64, 128, 256]},
}
DISCRIMINATOR_PRESETS = {
    "toy": {"layers": [[16, 4, 2], [32, 4, 2], [64, 4, 2], [64, 4, 2]], "act": "silu", "batchnorm": False},
    "tiny": {"layers": [[4, 4, 2], [8, 4, 2]], "act": "silu", "batchnorm": False},
    "dcgan": {"layers": [[64, 4, 2], [128, 4, 2], [256, 4, 2], [512, 4, 2]], "act": "leaky_relu", "batchnorm": True},
}
CLASSIFIER_PRESETS = {
    "toy": {"layers": [[16, 3, 1], [16, 3, 2], [32, 3, 2], [64, 3, 2], [64, 3, 2]], "act": "silu", "batchnorm": False},
    "tiny": {"layers": [[4, 3, 2], [8, 3, 2]], "act": "silu", "batchnorm": False},
    "resnet50": {},
}


def describe(kind, preset, size, channels, **overrides):
    """Resolve a preset into a full descriptor dict."""
    table = {"generator": GENERATOR_PRESETS, "discriminator": DISCRIMINATOR_PRESETS,
             "classifier": CLASSIFIER_PRESETS}.get(kind)
    if table is None:
        raise ConfigError(f"unknown network kind {kind!r}")
    if preset not in table:
        raise ConfigError(f"unknown {kind} preset {preset!r}; choose from {sorted(table)}")
    desc = {"kind": kind, "preset": preset, "size": int(size), "channels": int(channels)}
    desc.update(copy.deepcopy(table[preset]))
    if kind == "generator":
        desc.update({"domain": "frequency", "coord": True, "zero_init_output": True, "standardize": False})
    desc.update(overrides)
    return desc


def build(desc):
    desc = copy.deepcopy(desc)
    shape = (desc["size"], desc["size"], desc["channels"])
    kind = desc["kind"]
    if kind == "generator":
        c = desc["channels"]
        if desc["size"] % 4:
            raise ConfigError("generator image size must be a multiple of 4")
        inner = 2 * c if desc["domain"] == "frequency" else c
        cls = VGGEncoderDecoder if desc["preset"] == "vgg" else FreqEncoderDecoder
        H = cls(inner, widths=tuple(desc["widths"]), coord=desc["coord"] and desc["domain"] == "frequency",
                zero_init_output=desc["zero_init_output"])
        if desc["domain"] == "frequency":
            return FrequencyGenerator(H, shape, standardize=desc["standardize"], descriptor=desc)
        if desc["domain"] == "pixel":
            return PixelGenerator(H, shape, descriptor=desc)
        raise ConfigError(f"unknown generator domain {desc['domain']!r}")
    if kind in ("discriminator", "classifier"):
        if desc["preset"] == "resnet50":
            return ResNetBinary(shape, descriptor=desc)
        return ConvBinary(shape, [tuple(l) for l in desc["layers"]], act=desc["act"],
                          batchnorm=desc["batchnorm"], descriptor=desc)
    raise ConfigError(f"unknown network kind {kind!r}")


def parameter_count(module):
    return sum(p.numel() for p in module.parameters())
