from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamW:
    """Adam with decoupled weight decay; moments are tracked per parameter name."""

    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-4
    _m: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    _v: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    _t: dict[str, int] = field(default_factory=dict, repr=False)

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        """Update ``arrays`` in place for every name present in ``grads``; ``lr == 0`` leaves them untouched."""
        if lr == 0.0:
            return
        b1, b2 = self.betas
        for name in sorted(grads):
            g = grads[name]
            m = self._m.get(name, np.zeros_like(g))
            v = self._v.get(name, np.zeros_like(g))
            t = self._t.get(name, 0) + 1
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**t)
            v_hat = v / (1.0 - b2**t)
            p = arrays[name]
            arrays[name] = p - lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p)
            self._m[name], self._v[name], self._t[name] = m, v, t


def scheduled_lr(base: float, epoch: int, decay_epoch: int | None, factor: float) -> float:
    """Step schedule: ``base`` until ``decay_epoch`` (0-based), ``base * factor`` from then on."""
    if decay_epoch is not None and epoch >= decay_epoch:
        return base * factor
    return base


__all__ = ["AdamW", "scheduled_lr"]
