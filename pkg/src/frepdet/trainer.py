"""Alternating training of the perturbation generator, discriminator and classifier.

Each step computes all three losses from the same pre-update parameters, then
applies the updates in the order G, D, C.
"""
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import nets
from .classifier import bce_from_probs, predict_many
from .data import FAKE, REAL, require_both_classes, split_holdout
from .errors import ConfigError, TrainingDivergenceError
from .frepgan import PROB_EPS, LossBreakdown, generator_loss
from .metrics import accuracy, average_precision
from .reduce import torch_tree_mean

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lam: float = 0.5
    lr_generator: float = 1e-4
    # published value; unusually high for Adam, toy runs override it
    lr_discriminator: float = 1e-1
    lr_classifier: float = 1e-4
    batch_size: int = 16
    epochs: int = 20
    image_size: int = 256
    channels: int = 3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    adversarial_form: str = "saturating"
    generator_preset: str = "toy"
    generator_domain: str = "frequency"
    standardize_frequency: bool = False
    discriminator_preset: str = "toy"
    classifier_preset: str = "toy"
    pretrained_classifier: bool = False
    holdout_fraction: float = 0.1

    def validate(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        for name in ("lr_generator", "lr_discriminator", "lr_classifier"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.adversarial_form not in ("saturating", "nonsaturating"):
            raise ConfigError(f"unknown adversarial_form {self.adversarial_form!r}")
        if self.pretrained_classifier:
            raise ConfigError("pretrained classifier weights are not bundled; set pretrained_classifier = false")
        return self

    # ``lambda`` is the file key; it is a Python keyword, hence ``lam`` here
    def to_dict(self):
        d = dataclasses.asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()

    def descriptors(self):
        size, ch = self.image_size, self.channels
        return {
            "generator": nets.describe("generator", self.generator_preset, size, ch,
                                       domain=self.generator_domain, standardize=self.standardize_frequency),
            "discriminator": nets.describe("discriminator", self.discriminator_preset, size, ch),
            "classifier": nets.describe("classifier", self.classifier_preset, size, ch),
        }


NETS = ("generator", "discriminator", "classifier")


@dataclass
class TrainState:
    config: TrainConfig
    generator: torch.nn.Module
    discriminator: torch.nn.Module
    classifier: torch.nn.Module
    optimizers: dict
    step: int = 0
    epoch: int = 0
    history: list = field(default_factory=list)

    def net(self, name):
        return getattr(self, name)


def make_optimizers(config, g, d, c):
    betas = (config.beta1, config.beta2)
    return {
        "generator": torch.optim.Adam(g.parameters(), lr=config.lr_generator, betas=betas, eps=config.adam_eps),
        "discriminator": torch.optim.Adam(d.parameters(), lr=config.lr_discriminator, betas=betas, eps=config.adam_eps),
        "classifier": torch.optim.Adam(c.parameters(), lr=config.lr_classifier, betas=betas, eps=config.adam_eps),
    }


def build_state(config, descriptors=None):
    """Fresh networks; parameter init is a pure function of ``config.seed``."""
    config.validate()
    descriptors = descriptors or config.descriptors()
    gen = torch.Generator().manual_seed(config.seed)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(torch.randint(0, 2**62, (1,), generator=gen)))
        g = nets.build(descriptors["generator"])
        d = nets.build(descriptors["discriminator"])
        c = nets.build(descriptors["classifier"])
    return TrainState(config, g, d, c, make_optimizers(config, g, d, c))


def stack_items(items, dtype=torch.float32):
    x = np.stack([it.image for it in items]).transpose(0, 3, 1, 2)
    y = np.array([it.label for it in items], dtype=np.float64)
    return torch.from_numpy(np.ascontiguousarray(x)).to(dtype), torch.from_numpy(y).to(dtype)


def _check_finite(step, what, value):
    if not math.isfinite(value):
        raise TrainingDivergenceError(step, what)


def compute_losses(state, x, y):
    """Forward block: every loss from the current parameters, with graphs attached."""
    cfg = state.config
    g, d, c = state.generator, state.discriminator, state.classifier
    pm = g(x)
    l_com = torch_tree_mean((pm ** 2).flatten(1).mean(dim=1))
    p_pert = d(x + pm).clamp(PROB_EPS, 1.0 - PROB_EPS)
    if cfg.adversarial_form == "saturating":
        l_adv = torch_tree_mean(torch.log(1.0 - p_pert))
    else:
        l_adv = torch_tree_mean(-torch.log(p_pert))
    l_g = generator_loss(l_adv, l_com, cfg.lam)

    fixed = pm.detach()
    fake_term = torch_tree_mean(torch.log(1.0 - d(x + fixed).clamp(PROB_EPS, 1.0 - PROB_EPS)))
    reals = x[y == REAL]
    if len(reals):
        l_d = torch_tree_mean(torch.log(d(reals).clamp(PROB_EPS, 1.0 - PROB_EPS))) + fake_term
    else:
        # no real image in this batch: only the perturbed term is defined
        l_d = fake_term

    l_c = torch_tree_mean(bce_from_probs(c(x + fixed), y))
    return {"l_adv": l_adv, "l_com": l_com, "l_g": l_g, "l_d": l_d, "l_c": l_c}


def train_step(state, x, y):
    """One alternating update in place; returns the pre-update LossBreakdown."""
    losses = compute_losses(state, x, y)
    breakdown = LossBreakdown(**{k: float(v.detach()) for k, v in losses.items()})
    for k, v in breakdown.as_dict().items():
        _check_finite(state.step, k, v)

    objectives = {"generator": losses["l_g"], "discriminator": -losses["l_d"], "classifier": losses["l_c"]}
    grads = {}
    for name in NETS:
        params = list(state.net(name).parameters())
        grads[name] = torch.autograd.grad(objectives[name], params, retain_graph=True, allow_unused=True)
    for name in NETS:
        opt = state.optimizers[name]
        for p, gr in zip(state.net(name).parameters(), grads[name]):
            p.grad = torch.zeros_like(p) if gr is None else gr
        opt.step()
        opt.zero_grad(set_to_none=True)
        for p in state.net(name).parameters():
            if not bool(torch.isfinite(p).all()):
                raise TrainingDivergenceError(state.step, f"{name} parameter")
    state.step += 1
    state.history.append(breakdown)
    return state, breakdown


def epoch_order(seed, epoch, n):
    """Per-epoch shuffle; a pure function of (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def steps_per_epoch(n, batch_size):
    return -(-n // batch_size)


def evaluate_items(state, items):
    probs = predict_many(state.generator, state.classifier, [it.image for it in items])
    labels = np.array([it.label for it in items])
    return accuracy(probs, labels), average_precision(probs, labels)


def _mean_breakdown(rows):
    return {k: float(np.mean([getattr(r, k) for r in rows])) for k in ("l_adv", "l_com", "l_g", "l_d", "l_c")}


def train(config, dataset, eval_dataset=None, state=None, checkpoint_dir=None, log_path=None,
          stop_after_step=None):
    """Alternating G/D/C training for ``config.epochs`` epochs.

    Returns ``(state, records)`` where each record is the per-epoch metrics dict.
    ``state`` resumes a previous run; ``stop_after_step`` halts early (used to
    cut a run mid-epoch for checkpoint tests).
    """
    config.validate()
    dataset = list(dataset)
    require_both_classes(dataset)
    if eval_dataset is None:
        dataset, eval_dataset = split_holdout(dataset, config.holdout_fraction, config.seed)
        require_both_classes(dataset)
    eval_dataset = list(eval_dataset)
    state = state or build_state(config)
    records = []
    if config.epochs == 0:
        return state, records

    x_all, y_all = stack_items(dataset, dtype=next(state.generator.parameters()).dtype)
    n = len(dataset)
    spe = steps_per_epoch(n, config.batch_size)
    total = config.epochs * spe
    log_file = open(log_path, "a") if log_path else None
    try:
        while state.step < total:
            epoch = state.step // spe
            order = epoch_order(config.seed, epoch, n)
            for b in range(state.step - epoch * spe, spe):
                idx = torch.from_numpy(order[b * config.batch_size:(b + 1) * config.batch_size])
                train_step(state, x_all[idx], y_all[idx])
                if stop_after_step is not None and state.step >= stop_after_step:
                    return state, records
            state.epoch = epoch + 1
            acc, ap = evaluate_items(state, eval_dataset) if eval_dataset else (float("nan"), float("nan"))
            rec = {"epoch": state.epoch, "step": state.step,
                   **_mean_breakdown(state.history[epoch * spe:(epoch + 1) * spe]), "eval_acc": acc, "eval_ap": ap}
            records.append(rec)
            log.info("epoch %d step %d %s", state.epoch, state.step,
                     " ".join(f"{k}={v:.4g}" for k, v in rec.items() if k not in ("epoch", "step")))
            if log_file:
                log_file.write(json.dumps(rec) + "\n")
                log_file.flush()
            if checkpoint_dir:
                from .checkpoint import save_checkpoint

                Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
                save_checkpoint(state, Path(checkpoint_dir) / f"epoch_{state.epoch:03d}.ckpt")
                save_checkpoint(state, Path(checkpoint_dir) / "last.ckpt")
    finally:
        if log_file:
            log_file.close()
    return state, records
