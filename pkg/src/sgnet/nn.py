"""Layer primitives on top of the autodiff tensor: three-affine MLP trunks,
a standard GRU cell, and a vanilla tanh RNN cell.

Parameters live in a flat name->Tensor mapping; weight names end in ".w" and
biases in ".b" (the optimizer keys weight decay off that suffix).

Initialization: ReLU-trunk weights are He-uniform (+/- sqrt(6/fan_in));
recurrent-cell weights and all biases are uniform in +/- 1/sqrt(fan_in).
The narrower scale on the MLP trunks attenuates activations by ~sqrt(6) per
layer, which across message -> aggregate -> update -> repeat stacks buries
the contribution of any single distant node below 1e-6 and leaves training
on long-range signals stuck at chance; He scaling keeps unit gain.
"""

from __future__ import annotations

import zlib

import numpy as np

from .autodiff import Tensor, add, affine, linear, mul, parameter, relu, sigmoid, sub, tanh


def component_rng(seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible stream per named component: shared components
    get identical values across model variants."""
    return np.random.default_rng([seed, zlib.crc32(name.encode("utf-8"))])


def init_affine(params: dict, prefix: str, out_dim: int, in_dim: int, rng,
                gain: float = 1.0) -> None:
    w_bound = gain / np.sqrt(in_dim)
    b_bound = 1.0 / np.sqrt(in_dim)
    params[f"{prefix}.w"] = parameter(rng.uniform(-w_bound, w_bound, (out_dim, in_dim)))
    params[f"{prefix}.b"] = parameter(rng.uniform(-b_bound, b_bound, out_dim))


_HE_GAIN = float(np.sqrt(6.0))


def init_mlp(params: dict, prefix: str, in_dim: int, hidden: int, out_dim: int, rng) -> None:
    init_affine(params, f"{prefix}.l1", hidden, in_dim, rng, gain=_HE_GAIN)
    init_affine(params, f"{prefix}.l2", hidden, hidden, rng, gain=_HE_GAIN)
    init_affine(params, f"{prefix}.l3", out_dim, hidden, rng, gain=_HE_GAIN)


def mlp(params: dict, prefix: str, x: Tensor) -> Tensor:
    """Affine(hidden) -> ReLU -> Affine(hidden) -> ReLU -> Affine(out)."""
    h = relu(affine(x, params[f"{prefix}.l1.w"], params[f"{prefix}.l1.b"]))
    h = relu(affine(h, params[f"{prefix}.l2.w"], params[f"{prefix}.l2.b"]))
    return affine(h, params[f"{prefix}.l3.w"], params[f"{prefix}.l3.b"])


def init_gru(params: dict, prefix: str, dim: int, rng) -> None:
    for gate in ("z", "r", "n"):
        init_affine(params, f"{prefix}.{gate}x", dim, dim, rng)  # input weights + bias
        bound = 1.0 / np.sqrt(dim)
        params[f"{prefix}.{gate}h.w"] = parameter(rng.uniform(-bound, bound, (dim, dim)))


def gru_cell(h_prev: Tensor, x: Tensor, params: dict, prefix: str) -> Tensor:
    """Standard GRU step: sigmoid update/reset gates, tanh candidate.

        z = sigmoid(Wz x + Uz h + bz)
        r = sigmoid(Wr x + Ur h + br)
        n = tanh(Wn x + r * (Un h) + bn)
        h' = n + z * (h - n)
    """
    z = sigmoid(add(affine(x, params[f"{prefix}.zx.w"], params[f"{prefix}.zx.b"]),
                    linear(h_prev, params[f"{prefix}.zh.w"])))
    r = sigmoid(add(affine(x, params[f"{prefix}.rx.w"], params[f"{prefix}.rx.b"]),
                    linear(h_prev, params[f"{prefix}.rh.w"])))
    n = tanh(add(affine(x, params[f"{prefix}.nx.w"], params[f"{prefix}.nx.b"]),
                 mul(r, linear(h_prev, params[f"{prefix}.nh.w"]))))
    return add(n, mul(z, sub(h_prev, n)))


def init_rnn(params: dict, prefix: str, dim: int, rng) -> None:
    init_affine(params, f"{prefix}.x", dim, dim, rng)
    bound = 1.0 / np.sqrt(dim)
    params[f"{prefix}.h.w"] = parameter(rng.uniform(-bound, bound, (dim, dim)))


def rnn_cell(h_prev: Tensor, x: Tensor, params: dict, prefix: str) -> Tensor:
    """Single-gate recurrence: h' = tanh(W x + U h + b)."""
    return tanh(add(affine(x, params[f"{prefix}.x.w"], params[f"{prefix}.x.b"]),
                    linear(h_prev, params[f"{prefix}.h.w"])))
