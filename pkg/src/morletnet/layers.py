"""Reverse-mode layers with explicit forward and backward passes.

Every layer works on float64 arrays.  ``forward`` caches what ``backward``
needs; ``backward`` takes the upstream gradient, fills ``self.grads`` for
each entry of ``self.params`` and returns the gradient with respect to the
input.  Parameters in group 0 are the wavelet ``f``/``w``; everything else
is group 1.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import irfft, next_fast_len, rfft

from .errors import ContractError, DegenerateStatisticsError, DomainError, InvariantError
from .wavelet import (
    DEFAULT_TRUNC_SIGMAS,
    EPS_MAG,
    F_BOUNDS,
    W_BOUNDS,
    MorletParams,
    kernel_partials,
    sample_kernel,
    support_half_width,
)


class Layer:
    group = 1

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.masks: dict[str, np.ndarray] = {}

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, g):
        raise NotImplementedError

    def has_trainable(self) -> bool:
        return any(np.any(self.masks.get(k, True)) for k in self.params)

    def zero_grad(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}


def _check_batch(x, channels=None):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or min(x.shape) < 1:
        raise ContractError(f"expected a (batch, channels, time) array, got shape {x.shape}")
    if channels is not None and x.shape[1] != channels:
        raise ContractError(f"expected {channels} channel(s), got {x.shape[1]}")
    return x


# --------------------------------------------------------------------------
# wavelet transform layer

def _check_box(filters):
    for j, p in enumerate(filters):
        if not p.in_box():
            raise InvariantError(
                f"filter {j} has (f={p.f}, w={p.w}) outside "
                f"f in {list(F_BOUNDS)}, w in {list(W_BOUNDS)}")


def _fft_len(T):
    # correlating two length-T sequences needs 2T - 1 points to avoid wrap-around
    return next_fast_len(2 * T - 1, real=True)


def _wrap(values, half_width, n):
    """Place kernel taps k = -K..K at circular positions k mod n."""
    out = np.zeros(n)
    out[np.arange(-half_width, half_width + 1) % n] = values
    return out


def wavelet_layer_forward(x, filters, sample_rate, *, trunc_sigmas=DEFAULT_TRUNC_SIGMAS,
                          eps_mag=EPS_MAG, half_widths=None):
    """Magnitude transform of every (signal, filter) pair.

    ``x`` has shape (batch, 1, T); the result has shape (batch, F, T) and a
    cache for :func:`wavelet_layer_backward`.  ``half_widths`` freezes the
    kernel support per filter.  Correlations are computed with real FFTs
    long enough that no circular wrap-around reaches the output.
    """
    x = _check_batch(x, channels=1)
    _check_box(filters)
    if not np.all(np.isfinite(x)):
        raise DomainError("input signals must be finite")
    T = x.shape[2]
    n = _fft_len(T)
    Xf = rfft(x, n, axis=2)  # (B, 1, nf)
    supports, k_effs, re_w, im_w = [], [], [], []
    for j, p in enumerate(filters):
        k = support_half_width(p, sample_rate, trunc_sigmas) if half_widths is None else half_widths[j]
        supports.append(k)
        # taps beyond T - 1 only ever meet zero padding
        k_eff = min(k, T - 1)
        k_effs.append(k_eff)
        ker = sample_kernel(p, sample_rate, half_width=k_eff)
        re_w.append(_wrap(ker.re, k_eff, n))
        im_w.append(_wrap(ker.im, k_eff, n))
    Rf = rfft(np.array(re_w), axis=1)  # (F, nf)
    If = rfft(np.array(im_w), axis=1)
    c_re = irfft(Xf * Rf.conj(), n, axis=2)[..., :T]
    c_im = -irfft(Xf * If.conj(), n, axis=2)[..., :T]
    out = np.sqrt(c_re ** 2 + c_im ** 2 + eps_mag)
    cache = dict(Xf=Xf, Rf=Rf, If=If, T=T, n=n, c_re=c_re, c_im=c_im, out=out,
                 supports=supports, k_effs=k_effs, sample_rate=sample_rate,
                 filters=[MorletParams(p.f, p.w, p.f_trainable, p.w_trainable) for p in filters])
    return out, cache


def wavelet_layer_backward(cache, upstream):
    """Return ``(grad_x, grad_f, grad_w)``; frozen parameters get exact zeros."""
    out = cache["out"]
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != out.shape:
        raise ContractError(f"upstream gradient shape {g.shape} != output shape {out.shape}")
    Xf, T, n = cache["Xf"], cache["T"], cache["n"]
    filters, rate = cache["filters"], cache["sample_rate"]
    Gre_f = rfft(g * cache["c_re"] / out, n, axis=2)  # (B, F, nf)
    Gim_f = rfft(g * cache["c_im"] / out, n, axis=2)
    gx = irfft(np.sum(Gre_f * cache["Rf"] - Gim_f * cache["If"], axis=1), n, axis=1)[:, :T]
    gf = np.zeros(len(filters))
    gw = np.zeros(len(filters))
    trainable = [j for j, p in enumerate(filters) if p.f_trainable or p.w_trainable]
    if trainable:
        # dL/d(tap k) = sum over batch and tau of upstream[tau] * x[tau + k]
        d_re_all = irfft(np.sum(Xf * Gre_f[:, trainable].conj(), axis=0), n, axis=1)
        d_im_all = -irfft(np.sum(Xf * Gim_f[:, trainable].conj(), axis=0), n, axis=1)
    for row, j in enumerate(trainable):
        p, k_eff = filters[j], cache["k_effs"][j]
        lags = np.arange(-k_eff, k_eff + 1) % n
        d_re, d_im = d_re_all[row, lags], d_im_all[row, lags]
        dre_df, dim_df, dre_dw, dim_dw = kernel_partials(p, rate, half_width=k_eff)
        if p.f_trainable:
            gf[j] = d_re @ dre_df + d_im @ dim_df
        if p.w_trainable:
            gw[j] = d_re @ dre_dw + d_im @ dim_dw
    return gx[:, None, :], gf, gw


class WaveletLayer(Layer):
    """Trainable complex Morlet filter bank producing magnitude responses."""

    group = 0

    def __init__(self, frequencies, widths, sample_rate, *, f_trainable=True,
                 w_trainable=True, trunc_sigmas=DEFAULT_TRUNC_SIGMAS, eps_mag=EPS_MAG):
        super().__init__()
        f = np.asarray(frequencies, dtype=np.float64).ravel()
        w = np.broadcast_to(np.asarray(widths, dtype=np.float64), f.shape).copy()
        if f.size < 1:
            raise ContractError("a wavelet layer needs at least one filter")
        self.params = {"f": f.copy(), "w": w}
        self.masks = {
            "f": np.broadcast_to(np.asarray(f_trainable, dtype=bool), f.shape).copy(),
            "w": np.broadcast_to(np.asarray(w_trainable, dtype=bool), f.shape).copy(),
        }
        self.sample_rate = float(sample_rate)
        self.trunc_sigmas = trunc_sigmas
        self.eps_mag = eps_mag
        self.frozen_support = None
        self._cache = None
        self.zero_grad()

    @property
    def filters(self) -> list[MorletParams]:
        return [MorletParams(float(f), float(w), bool(ft), bool(wt))
                for f, w, ft, wt in zip(self.params["f"], self.params["w"],
                                        self.masks["f"], self.masks["w"])]

    @property
    def n_filters(self) -> int:
        return self.params["f"].size

    def supports(self):
        return [support_half_width(p, self.sample_rate, self.trunc_sigmas) for p in self.filters]

    def clip(self):
        np.clip(self.params["f"], *F_BOUNDS, out=self.params["f"])
        np.clip(self.params["w"], *W_BOUNDS, out=self.params["w"])

    def forward(self, x, train=False):
        out, self._cache = wavelet_layer_forward(
            x, self.filters, self.sample_rate, trunc_sigmas=self.trunc_sigmas,
            eps_mag=self.eps_mag, half_widths=self.frozen_support)
        return out

    def backward(self, g):
        gx, gf, gw = wavelet_layer_backward(self._cache, g)
        self.grads = {"f": gf, "w": gw}
        return gx


# --------------------------------------------------------------------------
# batch normalization

class BatchNorm1d(Layer):
    """Per-channel normalization over the (batch, time) positions."""

    def __init__(self, channels, eps=1e-5, momentum=0.1):
        super().__init__()
        self.params = {"gamma": np.ones(channels), "beta": np.zeros(channels)}
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.eps = eps
        self.momentum = momentum
        self._cache = None
        self.zero_grad()

    def forward(self, x, train=False):
        x = _check_batch(x, channels=self.params["gamma"].size)
        gamma = self.params["gamma"][None, :, None]
        beta = self.params["beta"][None, :, None]
        if train:
            n = x.shape[0] * x.shape[2]
            if n < 2:
                raise DegenerateStatisticsError(
                    "train-mode batch norm needs at least 2 values per channel")
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mean
            self.running_var = (1 - m) * self.running_var + m * var * n / (n - 1)
            self._cache = ("train", xhat, inv_std, n)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean[None, :, None]) * inv_std[None, :, None]
            self._cache = ("eval", xhat, inv_std, None)
        return gamma * xhat + beta

    def backward(self, g):
        mode, xhat, inv_std, n = self._cache
        self.grads = {"gamma": np.sum(g * xhat, axis=(0, 2)), "beta": np.sum(g, axis=(0, 2))}
        dxhat = g * self.params["gamma"][None, :, None]
        if mode == "eval":
            return dxhat * inv_std[None, :, None]
        s1 = dxhat.sum(axis=(0, 2), keepdims=True)
        s2 = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
        return inv_std[None, :, None] / n * (n * dxhat - s1 - xhat * s2)


def batchnorm_forward(x, state: BatchNorm1d, train=True):
    return state.forward(x, train=train)


# --------------------------------------------------------------------------
# dense, tanh, flatten, standardize

def _uniform_fan_in(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense(Layer):
    def __init__(self, n_in, n_out, rng=None):
        super().__init__()
        if rng is None:
            W, b = np.zeros((n_out, n_in)), np.zeros(n_out)
        else:
            W = _uniform_fan_in(rng, (n_out, n_in), n_in)
            b = _uniform_fan_in(rng, (n_out,), n_in)
        self.params = {"W": W, "b": b}
        self._x = None
        self.zero_grad()

    def forward(self, x, train=False):
        x = np.asarray(x, dtype=np.float64)
        W = self.params["W"]
        if x.ndim != 2 or x.shape[1] != W.shape[1]:
            raise ContractError(f"dense layer expects (batch, {W.shape[1]}), got {x.shape}")
        self._x = x
        return x @ W.T + self.params["b"]

    def backward(self, g):
        self.grads = {"W": g.T @ self._x, "b": g.sum(axis=0)}
        return g @ self.params["W"]


def dense_forward(x, W, b):
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if x.shape[-1] != W.shape[1] or np.shape(b) != (W.shape[0],):
        raise ContractError(f"dimension mismatch: x {x.shape}, W {W.shape}, b {np.shape(b)}")
    return x @ W.T + b


def dense_backward(x, W, g):
    """Return ``(dW, db, dx)`` for ``y = W x + b`` given upstream ``g``."""
    x, g = np.atleast_2d(x), np.atleast_2d(g)
    return g.T @ x, g.sum(axis=0), g @ np.asarray(W)


class Tanh(Layer):
    def forward(self, x, train=False):
        self._y = np.tanh(x)
        return self._y

    def backward(self, g):
        return g * (1.0 - self._y ** 2)


class Flatten(Layer):
    """(batch, channels, time) -> (batch, channels*time), channel-major."""

    def forward(self, x, train=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)


class Standardize(Layer):
    """Fixed per-feature ``(x - mean) / std``; statistics are not trained."""

    def __init__(self, mean, std):
        super().__init__()
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    def forward(self, x, train=False):
        if x.shape[1:] != self.mean.shape:
            raise ContractError(f"feature shape {x.shape[1:]} != statistics shape {self.mean.shape}")
        return (x - self.mean) / self.std

    def backward(self, g):
        return g / self.std


# --------------------------------------------------------------------------
# convolution and pooling

class Conv1d(Layer):
    """Zero-padded, same-length 1D cross-correlation with bias."""

    def __init__(self, c_in, c_out, kernel_size=3, rng=None):
        super().__init__()
        if kernel_size % 2 != 1:
            raise ContractError("kernel_size must be odd for same-length output")
        shape = (c_out, c_in, kernel_size)
        fan_in = c_in * kernel_size
        if rng is None:
            W, b = np.zeros(shape), np.zeros(c_out)
        else:
            W = _uniform_fan_in(rng, shape, fan_in)
            b = _uniform_fan_in(rng, (c_out,), fan_in)
        self.params = {"W": W, "b": b}
        self.zero_grad()

    def forward(self, x, train=False):
        W = self.params["W"]
        x = _check_batch(x, channels=W.shape[1])
        p = W.shape[2] // 2
        xp = np.pad(x, ((0, 0), (0, 0), (p, p)))
        self._windows = sliding_window_view(xp, W.shape[2], axis=2)  # (B, C, T, k)
        self._T = x.shape[2]
        return np.einsum("bctk,ock->bot", self._windows, W) + self.params["b"][None, :, None]

    def backward(self, g):
        W = self.params["W"]
        self.grads = {"W": np.einsum("bot,bctk->ock", g, self._windows),
                      "b": g.sum(axis=(0, 2))}
        k, T = W.shape[2], self._T
        p = k // 2
        dxp = np.zeros((g.shape[0], W.shape[1], T + 2 * p))
        for i in range(k):
            dxp[:, :, i:i + T] += np.einsum("bot,oc->bct", g, W[:, :, i])
        return dxp[:, :, p:p + T]


class MaxPool1d(Layer):
    """Non-overlapping max pooling; an odd trailing element is dropped."""

    def __init__(self, width=2):
        super().__init__()
        self.width = width

    def forward(self, x, train=False):
        x = _check_batch(x)
        B, C, T = x.shape
        n = T // self.width
        if n < 1:
            raise ContractError(f"cannot pool length {T} with width {self.width}")
        blocks = x[:, :, :n * self.width].reshape(B, C, n, self.width)
        self._arg = blocks.argmax(axis=3)
        self._shape = x.shape
        return np.take_along_axis(blocks, self._arg[..., None], axis=3)[..., 0]

    def backward(self, g):
        B, C, T = self._shape
        n = g.shape[2]
        blocks = np.zeros((B, C, n, self.width))
        np.put_along_axis(blocks, self._arg[..., None], g[..., None], axis=3)
        dx = np.zeros(self._shape)
        dx[:, :, :n * self.width] = blocks.reshape(B, C, n * self.width)
        return dx


# --------------------------------------------------------------------------
# loss

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits, target):
    """Mean cross-entropy and its gradient with respect to the logits.

    Accepts one sample (``logits`` 1D, ``target`` int) or a batch
    (``logits`` (B, C), ``target`` (B,)).
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    z = np.atleast_2d(logits)
    y = np.atleast_1d(np.asarray(target))
    B, C = z.shape
    if C < 2:
        raise ContractError("need at least two classes")
    if y.shape != (B,):
        raise ContractError(f"target shape {y.shape} does not match batch size {B}")
    if not np.issubdtype(y.dtype, np.integer) or np.any(y < 0) or np.any(y >= C):
        raise ContractError(f"targets must be class indices in [0, {C})")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(B)
    loss = float(np.mean(log_norm - shifted[rows, y]))
    grad = softmax(z)
    grad[rows, y] -= 1.0
    grad /= B
    return loss, (grad[0] if single else grad)
