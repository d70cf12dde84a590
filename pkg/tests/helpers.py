"""Small shared builders for network tests."""
import numpy as np
import torch

from frepdet import nets


class ConstProb(torch.nn.Module):
    """Stand-in network returning fixed probabilities, one per sample (cycled)."""

    def __init__(self, *values):
        super().__init__()
        self.values = values

    def forward(self, x):
        n = x.shape[0]
        vals = [self.values[i % len(self.values)] for i in range(n)]
        return torch.tensor(vals, dtype=x.dtype)


class ConstMap(torch.nn.Module):
    def __init__(self, value):
        super().__init__()
        self.value = value

    def forward(self, x):
        return torch.full_like(x, self.value)


def tiny(kind, size=16, channels=1, seed=0, **overrides):
    """A float64 tiny-preset network with seeded random weights."""
    if kind == "generator":
        overrides.setdefault("zero_init_output", False)
    torch.manual_seed(seed)
    return nets.build(nets.describe(kind, "tiny", size, channels, **overrides)).double()


def zero_params(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def probe_gradients(loss_fn, module, rng, n_probe=24, step=1e-5, rtol=1e-3, floor=1e-7):
    """Compare autograd with central differences on random coordinates of every parameter."""
    from oracles import central_difference

    params = [p for p in module.parameters() if p.requires_grad]
    grads = torch.autograd.grad(loss_fn(), params, allow_unused=True)
    sizes = np.array([p.numel() for p in params])
    probed = 0
    for _ in range(n_probe):
        k = rng.choice(len(params), p=sizes / sizes.sum())
        idx = int(rng.integers(params[k].numel()))
        analytic = 0.0 if grads[k] is None else float(grads[k].reshape(-1)[idx])
        numeric = central_difference(lambda: loss_fn().item(), params[k], idx, step)
        assert abs(analytic - numeric) <= rtol * max(abs(analytic), abs(numeric)) + floor, (k, idx, analytic, numeric)
        probed += 1
    return probed
