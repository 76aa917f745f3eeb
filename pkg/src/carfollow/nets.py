"""Minimal dense-network machinery: forward, hand-written backprop, Adam.

Everything downstream (acceleration regressor, actor, critics) runs on this
float64 numpy engine so analytic gradients can be checked against central
finite differences to tight tolerances and training stays bit-reproducible
for a fixed seed.

Weight matrices are stored row-major with shape (n_in, n_out); a batch X of
shape (n, n_in) maps through X @ W + b.  Hidden activations are ReLU, the
output layer is linear.  Optional inverted dropout masks (already scaled by
1/keep) multiply hidden activations during training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass
class Mlp:
    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator) -> "Mlp":
        """Uniform fan-in init: U(-1/sqrt(n_in), 1/sqrt(n_in)) per layer."""
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError("need at least input and output sizes, all >= 1")
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            biases.append(rng.uniform(-bound, bound, size=n_out))
        return cls(sizes=sizes, weights=weights, biases=biases)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def forward(
        self,
        x: np.ndarray,
        dropout_masks: Sequence[np.ndarray] | None = None,
    ) -> tuple[np.ndarray, list]:
        """Batch forward pass returning (output, cache for backward).

        dropout_masks: one mask per hidden layer (inverted-dropout scaled),
        or None for inference.
        """
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} != expected {self.sizes[0]}")
        cache = []
        a = x
        for layer in range(self.n_layers - 1):
            z = a @ self.weights[layer] + self.biases[layer]
            r = np.maximum(z, 0.0)
            mask = None
            if dropout_masks is not None:
                mask = dropout_masks[layer]
                out = r * mask
            else:
                out = r
            cache.append((a, z, mask))
            a = out
        z_out = a @ self.weights[-1] + self.biases[-1]
        cache.append((a, z_out, None))
        return z_out, cache

    def backward(self, cache: list, d_out: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
        """Backprop d_out (dL/d output, batch-shaped) through the cached pass.

        Returns (dW list, db list, dX).  Gradients are plain sums of the
        per-sample chain rule; any 1/batch factors belong in d_out.
        """
        d_out = np.atleast_2d(np.asarray(d_out, dtype=np.float64))
        grads_w: list[np.ndarray] = [np.empty(0)] * self.n_layers
        grads_b: list[np.ndarray] = [np.empty(0)] * self.n_layers
        a_last, _, _ = cache[-1]
        grads_w[-1] = a_last.T @ d_out
        grads_b[-1] = d_out.sum(axis=0)
        d_a = d_out @ self.weights[-1].T
        for layer in range(self.n_layers - 2, -1, -1):
            a_prev, z, mask = cache[layer]
            if mask is not None:
                d_a = d_a * mask
            d_z = d_a * (z > 0.0)
            grads_w[layer] = a_prev.T @ d_z
            grads_b[layer] = d_z.sum(axis=0)
            d_a = d_z @ self.weights[layer].T
        return grads_w, grads_b, d_a

    def copy(self) -> "Mlp":
        return Mlp(
            sizes=self.sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        return cls(
            sizes=tuple(int(s) for s in d["sizes"]),
            weights=[np.array(w, dtype=np.float64) for w in d["weights"]],
            biases=[np.array(b, dtype=np.float64) for b in d["biases"]],
        )


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Polyak averaging in place: target <- tau*online + (1-tau)*target."""
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * ob


class Adam:
    """Adaptive-moment gradient descent over one Mlp's parameters."""

    def __init__(self, net: Mlp, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in net.weights]
        self.v_w = [np.zeros_like(w) for w in net.weights]
        self.m_b = [np.zeros_like(b) for b in net.biases]
        self.v_b = [np.zeros_like(b) for b in net.biases]

    def step(self, grads_w: list[np.ndarray], grads_b: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i in range(self.net.n_layers):
            for param, grad, m, v in (
                (self.net.weights[i], grads_w[i], self.m_w[i], self.v_w[i]),
                (self.net.biases[i], grads_b[i], self.m_b[i], self.v_b[i]),
            ):
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad * grad
                param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m_w": [m.tolist() for m in self.m_w],
            "v_w": [v.tolist() for v in self.v_w],
            "m_b": [m.tolist() for m in self.m_b],
            "v_b": [v.tolist() for v in self.v_b],
        }

    def load_state_dict(self, d: dict) -> None:
        self.t = int(d["t"])
        self.m_w = [np.array(x, dtype=np.float64) for x in d["m_w"]]
        self.v_w = [np.array(x, dtype=np.float64) for x in d["v_w"]]
        self.m_b = [np.array(x, dtype=np.float64) for x in d["m_b"]]
        self.v_b = [np.array(x, dtype=np.float64) for x in d["v_b"]]


class AdamScalar:
    """Adam for a single scalar parameter (e.g. a log-temperature)."""

    def __init__(self, value: float, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.value = value
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = 0.0
        self.v = 0.0

    def step(self, grad: float) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        self.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max over entries of |a - n| / max(1e-8, |a| + |n|)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(1e-8, np.abs(a) + np.abs(n))
    return float(np.max(np.abs(a - n) / denom))


def finite_difference_check(
    net: Mlp,
    loss_fn: Callable[[], float],
    analytic_w: list[np.ndarray],
    analytic_b: list[np.ndarray],
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic gradients and central differences.

    loss_fn must recompute the scalar loss from the net's current parameters.
    """
    worst = 0.0
    for layer in range(net.n_layers):
        for param, analytic in ((net.weights[layer], analytic_w[layer]), (net.biases[layer], analytic_b[layer])):
            flat = param.ravel()
            grad = np.asarray(analytic, dtype=np.float64).ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_fn()
                flat[i] = orig - h
                down = loss_fn()
                flat[i] = orig
                numeric = (up - down) / (2.0 * h)
                denom = max(1e-8, abs(grad[i]) + abs(numeric))
                worst = max(worst, abs(grad[i] - numeric) / denom)
    return worst
