"""Perturbation generator and discriminator operations, and the GAN losses.

Loss functions take torch batches ``(N, c, h, w)`` or sequences of numpy
``(h, w, c)`` images. ``d`` is any callable returning probabilities and ``g``
any callable returning perturbation maps, so constant stand-ins work in tests.
"""
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigError, EmptyInputError, ShapeError
from .reduce import torch_tree_mean
from .spectral import as_image

PROB_EPS = 1e-7
DEFAULT_LAMBDA = 0.5


def as_batch(images, dtype=None):
    """Stack numpy ``(h, w, c)`` images into a torch ``(N, c, h, w)`` tensor."""
    if isinstance(images, torch.Tensor):
        batch = images
    else:
        images = list(images)
        if not images:
            raise EmptyInputError("empty batch")
        arr = np.stack([as_image(im) for im in images])
        batch = torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))
    if batch.ndim != 4:
        raise ShapeError(f"batch must be (N, c, h, w), got {tuple(batch.shape)}")
    if batch.shape[0] == 0:
        raise EmptyInputError("empty batch")
    if dtype is not None:
        batch = batch.to(dtype)
    return batch


def _param_dtype(*modules):
    """dtype of the first module that has parameters, else None (keep input dtype)."""
    for module in modules:
        if isinstance(module, torch.nn.Module):
            for p in module.parameters():
                return p.dtype
    return None


def _image_to_tensor(image, module):
    x = as_image(image)
    t = torch.from_numpy(x.transpose(2, 0, 1).copy()).unsqueeze(0)
    return t.to(_param_dtype(module) or torch.float32)


def _tensor_to_image(t):
    return t[0].detach().to(torch.float64).numpy().transpose(1, 2, 0).copy()


def _check_shape(module, image):
    want = getattr(module, "image_shape", None)
    if want is not None and tuple(np.shape(image)) != tuple(want):
        raise ShapeError(f"image shape {np.shape(image)} does not match model shape {tuple(want)}")


def generate_perturbation(g, image):
    """``G(x)`` for one ``(h, w, c)`` image, as a numpy array of the same shape."""
    image = as_image(image)
    _check_shape(g, image)
    with torch.no_grad():
        return _tensor_to_image(g(_image_to_tensor(image, g)))


def apply_perturbation(image, pmap):
    """``x + G(x)``, deliberately not clamped."""
    image = as_image(image)
    pmap = np.asarray(pmap, dtype=np.float64)
    if pmap.shape != image.shape:
        raise ShapeError(f"perturbation shape {pmap.shape} != image shape {image.shape}")
    return image + pmap


def discriminate(d, image):
    """Probability that ``image`` is an unperturbed real image."""
    image = as_image(image)
    _check_shape(d, image)
    with torch.no_grad():
        return float(d(_image_to_tensor(image, d))[0])


def _clamped_log(p):
    return torch.log(p.clamp(PROB_EPS, 1.0 - PROB_EPS))


def perturbed_log_fake(d, g, batch):
    """Per-sample ``log(1 - D(x + G(x)))``; shared by the adversarial and D losses."""
    x = as_batch(batch, _param_dtype(g, d))
    p = d(x + g(x))
    return torch.log(1.0 - p.clamp(PROB_EPS, 1.0 - PROB_EPS))


def adversarial_loss(d, g, batch, form="saturating"):
    """Generator adversarial term, minimised by ``G``.

    ``saturating`` is ``mean log(1 - D(x + G(x)))``; ``nonsaturating`` is
    ``mean -log D(x + G(x))``.
    """
    if form == "saturating":
        return torch_tree_mean(perturbed_log_fake(d, g, batch))
    if form == "nonsaturating":
        x = as_batch(batch, _param_dtype(g, d))
        return torch_tree_mean(-_clamped_log(d(x + g(x))))
    raise ConfigError(f"unknown adversarial form {form!r}")


def compression_loss(g, batch):
    """Mean squared perturbation value per element (``>= 0``)."""
    x = as_batch(batch, _param_dtype(g))
    pm = g(x)
    return torch_tree_mean((pm ** 2).flatten(1).mean(dim=1))


def generator_loss(l_adv, l_com, lam=DEFAULT_LAMBDA):
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    return lam * l_adv + (1.0 - lam) * l_com


def discriminator_loss(d, g, real_batch, mixed_batch):
    """``mean log D(x_r) + mean log(1 - D(x + G(x)))``, maximised by ``D``."""
    xr = as_batch(real_batch, _param_dtype(d, g))
    real_term = torch_tree_mean(_clamped_log(d(xr)))
    return real_term + torch_tree_mean(perturbed_log_fake(d, g, mixed_batch))


@dataclass
class LossBreakdown:
    l_adv: float
    l_com: float
    l_g: float
    l_d: float
    l_c: float = float("nan")

    def as_dict(self):
        return {"l_adv": self.l_adv, "l_com": self.l_com, "l_g": self.l_g,
                "l_d": self.l_d, "l_c": self.l_c}
