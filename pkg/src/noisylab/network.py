"""A small fully-connected classifier trained with momentum SGD.

Plain numpy, no regularization layers. The forward pass exposes softmax
confidences; the backward pass averages the loss gradient over an explicit
subset of the batch so callers control which samples update the weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .seeding import SeedLike, rng_from

# Per-sample logit gradient of some loss: (probs, targets) -> d loss / d logits.
GradFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class NumericalFault(RuntimeError):
    """Non-finite values reached the forward pass or a parameter update."""


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for overflow safety."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class LrSchedule:
    """Step schedule: start at ``initial``, multiply at each milestone epoch.

    A milestone (e, m) applies from epoch e onward, and milestones compound.
    """

    initial: float = 0.1
    milestones: tuple[tuple[int, float], ...] = ((50, 0.2), (75, 0.2))

    def __post_init__(self) -> None:
        if self.initial <= 0:
            raise ValueError("initial learning rate must be positive")

    def rate(self, epoch: int) -> float:
        rate = self.initial
        for milestone, factor in self.milestones:
            if epoch >= milestone:
                rate *= factor
        return rate


class Mlp:
    """ReLU multi-layer perceptron with a linear logit head.

    Weights start from a seeded uniform draw scaled by fan-in
    (limit sqrt(6 / fan_in)); biases start at zero.
    """

    def __init__(self, layer_sizes: Sequence[int], seed: SeedLike):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError("layer_sizes needs at least input and output widths")
        rng = rng_from(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def _forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Logits plus the post-activation inputs of every layer."""
        inputs = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
                inputs.append(h)
        return h, inputs

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self._forward(np.asarray(x, dtype=np.float64))[0]

    def confidences(self, x: np.ndarray) -> np.ndarray:
        """Softmax class probabilities; rows sum to 1."""
        logits = self.logits(x)
        if not np.all(np.isfinite(logits)):
            raise NumericalFault("non-finite logits in forward pass")
        return softmax(logits)

    def backward(self, x: np.ndarray, targets: np.ndarray, grad_fn: GradFn) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients of the mean per-sample loss over the given samples.

        ``grad_fn`` supplies each sample's loss gradient at the logits; this
        routine handles the averaging and the backpropagation through the
        ReLU stack. Raises on an empty sample set: the caller decides what a
        legal selection is, never this layer.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] == 0:
            raise ValueError("backward needs at least one sample")
        logits, inputs = self._forward(x)
        if not np.all(np.isfinite(logits)):
            raise NumericalFault("non-finite logits in forward pass")
        probs = softmax(logits)
        delta = grad_fn(probs, np.asarray(targets, dtype=np.float64)) / x.shape[0]
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)  # type: ignore[list-item]
        for i in range(len(self.weights) - 1, -1, -1):
            grads[i] = (inputs[i].T @ delta, delta.sum(axis=0))
            if i > 0:
                # ReLU derivative taken as 1 strictly above zero.
                delta = (delta @ self.weights[i].T) * (inputs[i] > 0.0)
        return grads


class MomentumSgd:
    """Classical momentum: v <- gamma v + g, w <- w - eta(epoch) v."""

    def __init__(self, net: Mlp, momentum: float = 0.9, schedule: LrSchedule | None = None):
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        self.momentum = momentum
        self.schedule = schedule if schedule is not None else LrSchedule()
        self.velocities = [
            (np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)
        ]

    def step(self, net: Mlp, grads: list[tuple[np.ndarray, np.ndarray]], epoch: int) -> None:
        rate = self.schedule.rate(epoch)
        for i, (gw, gb) in enumerate(grads):
            vw, vb = self.velocities[i]
            vw *= self.momentum
            vw += gw
            vb *= self.momentum
            vb += gb
            net.weights[i] -= rate * vw
            net.biases[i] -= rate * vb
            if not (np.all(np.isfinite(net.weights[i])) and np.all(np.isfinite(net.biases[i]))):
                raise NumericalFault("non-finite parameter after update")
