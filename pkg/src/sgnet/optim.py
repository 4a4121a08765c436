"""Adam with decoupled weight decay.

Bias-corrected moments follow the raw gradients; weight decay is applied
directly to the parameters (never through the moment estimates) and skips
bias vectors. A non-finite gradient rejects the whole step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


class OptimizerError(RuntimeError):
    pass


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def _is_bias(name: str) -> bool:
    return name.rsplit(".", 1)[-1] == "b"


def adam_step(params: dict, state: AdamState) -> None:
    """Apply one update in place; `params` maps names to leaf Tensors whose
    .grad fields hold the current gradients (missing grads count as zero)."""
    grads = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient in {name!r}; step rejected")
        grads[name] = g

    state.t += 1
    t = state.t
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.data -= state.lr * update
        if state.weight_decay and not _is_bias(name):
            p.data -= state.lr * state.weight_decay * p.data


def zero_grads(params: dict) -> None:
    for p in params.values():
        p.grad = None
