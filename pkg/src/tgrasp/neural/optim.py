"""Named parameter store and the Adam optimizer."""

import numpy as np

from ..errors import TrainingDiverged
from .autodiff import leaf


class ParamStore:
    """Insertion-ordered map name -> DiffArray leaf, with Adam moments."""

    def __init__(self):
        self.params = {}
        self.m = {}
        self.v = {}
        self.step_count = 0

    def add(self, name, values):
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = leaf(np.asarray(values, dtype=np.float64))
        self.params[name] = p
        self.m[name] = np.zeros_like(p.values)
        self.v[name] = np.zeros_like(p.values)
        return p

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def names(self):
        return list(self.params)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def n_scalars(self):
        return sum(p.values.size for p in self.params.values())


def adam_step(store, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """Bias-corrected Adam update; increments the step counter, zeroes grads."""
    b1, b2 = betas
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in store.params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.values)
        elif not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient for parameter {name!r}")
        m = store.m[name]
        v = store.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.values -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad = None
