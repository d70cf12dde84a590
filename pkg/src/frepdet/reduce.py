"""Order-independent reductions.

Values are sorted before a fixed pairwise-tree sum, so any permutation of the
inputs yields a bit-identical result.
"""
import numpy as np
import torch


def _pairwise(x, add):
    while len(x) > 1:
        if len(x) % 2:
            x = x + [x[-1] * 0]
        x = [add(x[i], x[i + 1]) for i in range(0, len(x), 2)]
    return x[0]


def tree_sum(stack):
    """Sum a numpy stack over axis 0, permutation-invariantly."""
    stack = np.sort(np.asarray(stack, dtype=np.float64), axis=0)
    return _pairwise(list(stack), np.add)


def tree_mean(stack):
    stack = np.asarray(stack, dtype=np.float64)
    return tree_sum(stack) / stack.shape[0]


def torch_tree_mean(values):
    """Differentiable permutation-invariant mean of a 1-D tensor."""
    ordered = torch.sort(values).values
    total = _pairwise(list(ordered.unbind(0)), torch.add)
    return total / values.shape[0]
