"""Adam with one learning rate for the wavelet parameters and one for the rest."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NonFiniteError

LR_WAVELET = 0.1
LR_OTHER = 0.0001


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState, lrs, masks=None):
    """One bias-corrected Adam update, in place.

    ``params``, ``grads`` and ``lrs`` are dicts keyed by parameter name;
    ``lrs`` holds the learning rate of the group each parameter belongs to.
    ``masks`` optionally marks the trainable entries of each array.  Nothing
    is modified if any gradient is non-finite.
    """
    for key, p in params.items():
        g = grads[key]
        if np.shape(g) != np.shape(p):
            raise ContractError(f"gradient for {key} has shape {np.shape(g)}, expected {np.shape(p)}")
        if lrs[key] < 0:
            raise ContractError(f"learning rate for {key} must be non-negative")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {key}; step aborted")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for key, p in params.items():
        g = grads[key]
        if masks is not None and key in masks:
            g = np.where(masks[key], g, 0.0)
        m = b1 * state.m.get(key, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(key, 0.0) + (1 - b2) * g * g
        state.m[key], state.v[key] = m, v
        m_hat = m / (1 - b1 ** state.t)
        v_hat = v / (1 - b2 ** state.t)
        step = lrs[key] * m_hat / (np.sqrt(v_hat) + state.eps)
        if masks is not None and key in masks:
            step = np.where(masks[key], step, 0.0)
        p -= step
    return params


class Adam:
    """Adam over a model's parameters, split into the two learning-rate groups."""

    def __init__(self, model, lr_wavelet=LR_WAVELET, lr_other=LR_OTHER, **kwargs):
        self.model = model
        self.lrs = {0: lr_wavelet, 1: lr_other}
        self.state = AdamState(**kwargs)

    def step(self):
        refs = self.model.parameters()
        params = {r.key: r.value for r in refs}
        grads = {r.key: r.grad for r in refs}
        lrs = {r.key: self.lrs[r.group] for r in refs}
        masks = {r.key: r.mask for r in refs}
        adam_step(params, grads, self.state, lrs, masks)
