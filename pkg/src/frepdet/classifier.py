"""Deepfake classifier operations: classification, its loss, end-to-end prediction."""
from dataclasses import dataclass

import numpy as np
import torch

from .errors import EmptyInputError, InvalidLabelError
from .frepgan import (PROB_EPS, _check_shape, _image_to_tensor, _param_dtype, apply_perturbation,
                      as_batch, generate_perturbation)
from .reduce import torch_tree_mean
from .spectral import as_image

THRESHOLD = 0.5


@dataclass(frozen=True)
class Prediction:
    prob_fake: float
    label: int


def classify(c, perturbed):
    x = as_image(perturbed)
    _check_shape(c, x)
    with torch.no_grad():
        p = float(c(_image_to_tensor(x, c))[0])
    return Prediction(prob_fake=p, label=int(p >= THRESHOLD))


def _split_labeled(batch, labels):
    if labels is None:
        pairs = list(batch)
        if not pairs:
            raise EmptyInputError("empty batch")
        images = [im for im, _ in pairs]
        labels = [y for _, y in pairs]
    else:
        images = batch
    y = torch.as_tensor(np.asarray(labels, dtype=np.float64))
    if y.ndim != 1 or y.numel() == 0:
        raise EmptyInputError("empty batch")
    if not bool(((y == 0) | (y == 1)).all()):
        raise InvalidLabelError(f"labels must be 0 or 1, got {sorted(set(y.tolist()))}")
    return images, y


def bce_from_probs(p, y):
    """Per-sample binary cross-entropy with probabilities clamped to [eps, 1-eps]."""
    p = p.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -(y * torch.log(p) + (1.0 - y) * torch.log(1.0 - p))


def classifier_loss(c, g, batch, labels=None):
    """Mean BCE of ``C(x + G(x))``; ``G`` is held fixed (no gradient).

    ``batch`` is either a sequence of ``(image, label)`` pairs or, with
    ``labels`` given, a torch batch / image sequence.
    """
    images, y = _split_labeled(batch, labels)
    x = as_batch(images, _param_dtype(c, g))
    with torch.no_grad():
        perturbed = x + g(x)
    p = c(perturbed)
    return torch_tree_mean(bce_from_probs(p, y.to(p.dtype)))


def predict(g, c, image):
    """``classify(c, x + G(x))``."""
    image = as_image(image)
    return classify(c, apply_perturbation(image, generate_perturbation(g, image)))


def predict_many(g, c, images):
    """Fake probabilities, one image at a time so results never depend on batching."""
    return np.array([predict(g, c, im).prob_fake for im in images])
