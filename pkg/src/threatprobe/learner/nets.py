"""Minimal fully-connected network with exact reverse-mode gradients.

Plain numpy throughout: weight matrices are (fan_in, fan_out), hidden layers
use rectified-linear activations, the output layer is linear.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_mlp(sizes: list[int], rng: np.random.Generator) -> Mlp:
    """Symmetric uniform init scaled by 1/sqrt(fan_in)."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return Mlp(weights=weights, biases=biases)


def clone_mlp(mlp: Mlp) -> Mlp:
    return Mlp(weights=[w.copy() for w in mlp.weights],
               biases=[b.copy() for b in mlp.biases])


def mlp_forward(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """Single-sample evaluation; x is (fan_in,)."""
    h = np.asarray(x, dtype=float)
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        h = h @ w + b
        if i < last:
            np.maximum(h, 0.0, out=h)
    return h


def mlp_forward_batch(mlp: Mlp, x: np.ndarray,
                      return_cache: bool = False):
    """Batched evaluation; x is (batch, fan_in).

    With return_cache=True also returns the per-layer inputs needed by
    mlp_backward_batch.
    """
    h = np.asarray(x, dtype=float)
    cache = [h]
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        h = h @ w + b
        if i < last:
            np.maximum(h, 0.0, out=h)
        if i < last:
            cache.append(h)
    if return_cache:
        return h, cache
    return h


def mlp_backward_batch(mlp: Mlp, cache: list[np.ndarray],
                       grad_out: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Reverse-mode gradients of sum(loss) given d loss / d output.

    cache is the layer-input list from mlp_forward_batch(..., return_cache=True);
    grad_out is (batch, fan_out). Returns (weight grads, bias grads) matching
    the parameter shapes.
    """
    grads_w = [None] * len(mlp.weights)
    grads_b = [None] * len(mlp.biases)
    delta = np.asarray(grad_out, dtype=float)
    for i in range(len(mlp.weights) - 1, -1, -1):
        layer_in = cache[i]
        grads_w[i] = layer_in.T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ mlp.weights[i].T
            # rectifier gate: the cached post-activation is zero exactly
            # where the unit was off
            delta = delta * (cache[i] > 0.0)
    return grads_w, grads_b


def flatten_params(mlp: Mlp) -> np.ndarray:
    return np.concatenate([p.ravel() for p in mlp.params()])


def set_flat_params(mlp: Mlp, flat: np.ndarray) -> None:
    offset = 0
    for p in mlp.params():
        n = p.size
        p[...] = flat[offset:offset + n].reshape(p.shape)
        offset += n
    if offset != flat.size:
        raise ValueError("flat parameter vector has wrong length")
