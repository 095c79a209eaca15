"""Adam optimizer with decoupled weight decay, plus global-norm clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor


@dataclass
class Param:
    """A named trainable tensor. ``decay`` excludes biases and norm affines."""

    name: str
    tensor: Tensor
    decay: bool = True


def clip_global_norm(params: list[Param], max_norm: float) -> float:
    """Scale all gradients jointly so their global L2 norm is <= max_norm.

    Returns the pre-clip norm. ``max_norm == 0`` disables clipping.
    """
    total = 0.0
    for p in params:
        if p.tensor.grad is not None:
            total += float((p.tensor.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        ratio = max_norm / norm
        for p in params:
            if p.tensor.grad is not None:
                p.tensor.grad *= ratio
    return norm


@dataclass
class Adam:
    """Standard Adam with bias correction; decay is applied outside the moments.

    ``step()`` reads gradients and leaves them untouched; the caller zeroes
    them between batches.
    """

    params: list[Param]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    _m: list[np.ndarray] = field(default_factory=list, repr=False)
    _v: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self):
        for p in self.params:
            self._m.append(np.zeros_like(p.tensor.data))
            self._v.append(np.zeros_like(p.tensor.data))

    def zero_grad(self) -> None:
        for p in self.params:
            p.tensor.grad = None

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.tensor.grad
            if g is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / bc1
            v_hat = v / bc2
            update = self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
            if p.decay and self.weight_decay > 0.0:
                update = update + self.lr * self.weight_decay * p.tensor.data
            p.tensor.data = (p.tensor.data - update).astype(p.tensor.data.dtype)
