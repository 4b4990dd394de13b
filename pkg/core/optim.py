"""Momentum SGD for the model parameters and Adam for the learnable radius.

Both steps take `{name: Tensor}` parameters and `{name: ndarray}` gradients, update in place,
and refuse (return False, record an event) when any gradient is non-finite.
"""

from dataclasses import dataclass, field

import numpy as np

from core import events as ev
from core.autodiff import Tensor
from core.errors import ShapeError


@dataclass
class SGDState:
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    lr_mult: dict[str, float] = field(default_factory=dict)  # per-parameter lr scale, 1 when absent
    buffers: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class AdamState:
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def _collect(params: dict[str, Tensor], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray] | None:
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"grad[{name}]", p.shape, g.shape)
        if not np.all(np.isfinite(g)):
            return None
        out[name] = g
    return out


def sgd_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: SGDState,
    events: ev.EventLog | None = None,
) -> bool:
    """p <- p - lr * lr_mult[name] * buf, buf <- momentum * buf + (g + wd * p); the first step uses buf = g."""
    collected = _collect(params, grads)
    if collected is None:
        ev.record(events, ev.SKIP_SGD_NONFINITE, params=sorted(params))
        return False
    for name, p in params.items():
        g = collected[name]
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        if state.momentum:
            buf = state.buffers.get(name)
            buf = g.copy() if buf is None else state.momentum * buf + g
            state.buffers[name] = buf
            g = buf
        p.data -= state.lr * state.lr_mult.get(name, 1.0) * g
    return True


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    events: ev.EventLog | None = None,
) -> bool:
    collected = _collect(params, grads)
    if collected is None:
        ev.record(events, ev.SKIP_ADAM_NONFINITE, params=sorted(params))
        return False
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, p in params.items():
        g = collected[name]
        m = state.m.get(name, np.zeros_like(p.data))
        v = state.v.get(name, np.zeros_like(p.data))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return True
