"""Complex Morlet kernels, their analytic partials and the magnitude transform.

A filter is described by a center frequency ``f`` (Hz) and a width ``w``
(cycles).  The derived resolutions are ``s_f = f / w`` and
``s_t = 1 / (2 pi s_f)``, and the kernel is::

    psi(t) = (s_t / sqrt(2 pi)) ** -0.5 * exp(2j pi f t) * exp(-t**2 / (2 s_t**2))

With this normalization the continuous energy is ``pi * sqrt(2)`` for every
``(f, w)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

F_BOUNDS = (0.5, 30.0)
W_BOUNDS = (4.0, 15.0)
DEFAULT_TRUNC_SIGMAS = 4.0
EPS_MAG = 1e-12
KERNEL_ENERGY = math.pi * math.sqrt(2.0)


@dataclass
class MorletParams:
    f: float
    w: float
    f_trainable: bool = True
    w_trainable: bool = True

    def in_box(self) -> bool:
        return (F_BOUNDS[0] <= self.f <= F_BOUNDS[1]
                and W_BOUNDS[0] <= self.w <= W_BOUNDS[1])


@dataclass(frozen=True)
class DerivedWidths:
    s_f: float
    s_t: float


@dataclass(frozen=True)
class SampledKernel:
    dt: float
    t: np.ndarray
    re: np.ndarray
    im: np.ndarray

    @property
    def half_width(self) -> int:
        return (len(self.t) - 1) // 2

    def energy(self) -> float:
        return float(np.sum(self.re ** 2 + self.im ** 2) * self.dt)


def derived_widths(p: MorletParams) -> DerivedWidths:
    if not (p.f > 0 and p.w > 0):
        raise DomainError(f"f and w must be positive, got f={p.f}, w={p.w}")
    s_f = p.f / p.w
    return DerivedWidths(s_f=s_f, s_t=1.0 / (2.0 * math.pi * s_f))


def support_half_width(p: MorletParams, sample_rate: float,
                       trunc_sigmas: float = DEFAULT_TRUNC_SIGMAS) -> int:
    """Number of samples K on each side of t=0 (grid is k*dt, |k| <= K)."""
    if sample_rate <= 0:
        raise DomainError(f"sample_rate must be positive, got {sample_rate}")
    if trunc_sigmas <= 0:
        raise DomainError(f"trunc_sigmas must be positive, got {trunc_sigmas}")
    s_t = derived_widths(p).s_t
    return int(math.ceil(trunc_sigmas * s_t * sample_rate))


def _grid(p, sample_rate, trunc_sigmas, half_width):
    if half_width is None:
        half_width = support_half_width(p, sample_rate, trunc_sigmas)
    elif sample_rate <= 0:
        raise DomainError(f"sample_rate must be positive, got {sample_rate}")
    dt = 1.0 / sample_rate
    t = np.arange(-half_width, half_width + 1, dtype=np.float64) * dt
    return dt, t


def _evaluate(f, s_t, t):
    amp = (2.0 * math.pi) ** 0.25 / math.sqrt(s_t)
    env = amp * np.exp(-t ** 2 / (2.0 * s_t ** 2))
    phase = 2.0 * math.pi * f * t
    re = env * np.cos(phase)
    im = env * np.sin(phase)
    # sin(0) is exactly 0 in IEEE arithmetic, so im is exactly odd on the grid
    return re, im


def sample_kernel(p: MorletParams, sample_rate: float,
                  trunc_sigmas: float = DEFAULT_TRUNC_SIGMAS,
                  half_width: int | None = None) -> SampledKernel:
    """Sample the kernel on a symmetric grid of spacing ``1/sample_rate``.

    ``half_width`` overrides the truncation-derived support; it is how a
    caller freezes the grid while perturbing ``f`` or ``w``.
    """
    s_t = derived_widths(p).s_t
    dt, t = _grid(p, sample_rate, trunc_sigmas, half_width)
    re, im = _evaluate(p.f, s_t, t)
    return SampledKernel(dt=dt, t=t, re=re, im=im)


def kernel_partials(p: MorletParams, sample_rate: float,
                    trunc_sigmas: float = DEFAULT_TRUNC_SIGMAS,
                    half_width: int | None = None):
    """Return ``(dre_df, dim_df, dre_dw, dim_dw)`` on the kernel's grid.

    ``s_t = w / (2 pi f)`` is substituted before differentiating; the grid is
    held fixed.
    """
    s_t = derived_widths(p).s_t
    _, t = _grid(p, sample_rate, trunc_sigmas, half_width)
    re, im = _evaluate(p.f, s_t, t)
    # d log(amplitude * envelope) / d s_t, times d s_t / d f = -s_t / f
    shape = -0.5 + t ** 2 / s_t ** 2
    two_pi_t = 2.0 * math.pi * t
    df = -shape / p.f
    dw = shape / p.w
    dre_df = -two_pi_t * im + df * re
    dim_df = two_pi_t * re + df * im
    return dre_df, dim_df, dw * re, dw * im


def cwt_magnitude(signal, kernel: SampledKernel, eps_mag: float = EPS_MAG) -> np.ndarray:
    """Magnitude of the same-length, zero-padded correlation with conj(psi)."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("signal must be a non-empty 1D sequence")
    k = kernel.half_width
    xp = np.pad(x, k)
    c_re = np.correlate(xp, kernel.re, mode="valid")
    c_im = -np.correlate(xp, kernel.im, mode="valid")
    return np.sqrt(c_re ** 2 + c_im ** 2 + eps_mag)


def clip_wavelet_params(filters: list[MorletParams]) -> list[MorletParams]:
    """Project every filter back into the admissible (f, w) box."""
    out = []
    for p in filters:
        out.append(MorletParams(
            f=min(max(p.f, F_BOUNDS[0]), F_BOUNDS[1]),
            w=min(max(p.w, W_BOUNDS[0]), W_BOUNDS[1]),
            f_trainable=p.f_trainable,
            w_trainable=p.w_trainable,
        ))
    return out
