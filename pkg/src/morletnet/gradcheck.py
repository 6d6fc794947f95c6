"""Central finite-difference verification of a model's analytic gradients."""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError
from .layers import BatchNorm1d, softmax_xent


@dataclass
class GradcheckReport:
    per_param: dict = field(default_factory=dict)  # key -> max relative error
    n_checked: int = 0
    worst: tuple | None = None  # (key, flat index, analytic, numeric)

    @property
    def max_rel_error(self) -> float:
        return max(self.per_param.values(), default=0.0)


def relative_error(a, n, floor=1e-8):
    """``|a - n| / (|a| + |n|)``, or None when both are below ``floor``."""
    denom = abs(a) + abs(n)
    if denom <= floor:
        return None
    return abs(a - n) / denom


@contextmanager
def _frozen(model):
    """Freeze kernel supports and batch-norm running statistics."""
    saved_bn = [(l, l.running_mean.copy(), l.running_var.copy())
                for l in model.layers if isinstance(l, BatchNorm1d)]
    wls = model.wavelet_layers()
    saved_support = [wl.frozen_support for wl in wls]
    for wl in wls:
        wl.frozen_support = wl.supports()
    try:
        yield
    finally:
        for l, m, v in saved_bn:
            l.running_mean, l.running_var = m, v
        for wl, s in zip(wls, saved_support):
            wl.frozen_support = s


def _loss(model, x, y, train, key):
    loss, _ = softmax_xent(model.forward(x, train=train), y)
    if not math.isfinite(loss):
        raise NonFiniteError(f"non-finite loss while perturbing {key}")
    return loss


def gradcheck(model, x, y, step=1e-5, train=True, floor=1e-8) -> GradcheckReport:
    """Compare backprop gradients of the mean cross-entropy with central
    differences for every trainable scalar.

    Frozen scalars (e.g. a fixed wavelet width) are left out of the report.
    With ``train=True`` batch norm uses batch statistics, which is the
    function the training loop differentiates; running statistics are
    restored afterwards.
    """
    report = GradcheckReport()
    with _frozen(model):
        loss, g = softmax_xent(model.forward(x, train=train), y)
        if not math.isfinite(loss):
            raise NonFiniteError("non-finite loss at the unperturbed parameters")
        model.backward(g)
        refs = model.parameters()
        analytic = {r.key: r.grad.copy() for r in refs}
        worst = -1.0
        for r in refs:
            value, mask = r.value, r.mask
            errs = []
            for idx in zip(*np.nonzero(mask)) if value.ndim else [()]:
                old = value[idx]
                value[idx] = old + step
                lp = _loss(model, x, y, train, r.key)
                value[idx] = old - step
                lm = _loss(model, x, y, train, r.key)
                value[idx] = old
                num = (lp - lm) / (2 * step)
                a = float(analytic[r.key][idx])
                e = relative_error(a, num, floor)
                report.n_checked += 1
                if e is not None:
                    errs.append(e)
                    if e > worst:
                        worst = e
                        report.worst = (r.key, tuple(int(i) for i in idx), a, num)
            report.per_param[r.key] = max(errs, default=0.0)
    return report
