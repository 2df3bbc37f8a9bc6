"""Adam with bias correction, per-group learning rates, and no warm-up schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Parameter


@dataclass
class AdamState:
    """Optimizer state: per-parameter moments plus hyperparameters.

    group_lrs maps a parameter-name prefix (e.g. "enc.") to a learning rate;
    parameters without a matching prefix use lr. The longest matching prefix
    wins.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    group_lrs: dict[str, float] = field(default_factory=dict)
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr_for(self, name: str) -> float:
        best = None
        for prefix, lr in self.group_lrs.items():
            if name.startswith(prefix) and (best is None or len(prefix) > len(best)):
                best = prefix
        return self.lr if best is None else self.group_lrs[best]


def adam_step(params, state: AdamState) -> None:
    """One Adam update over all parameters with populated gradients.

    Gradients are cleared afterwards. Parameters whose grad is None are
    skipped without advancing their moments.
    """
    values = params.values() if isinstance(params, dict) else params
    touched = [p for p in values if p.grad is not None]
    if not touched:
        return
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p in touched:
        if not isinstance(p, Parameter):
            raise TypeError("adam_step expects Parameter instances")
        g = p.grad
        m = state.m.get(p.name)
        v = state.v.get(p.name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[p.name] = m
        state.v[p.name] = v
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps_adam)
        p.data -= state.lr_for(p.name) * update
        p.grad = None
