"""Independent reference implementations used only by the tests.

Nothing here imports the package's numerical code; each oracle evaluates
the closed-form kernel or definition directly, in plain loops.
"""
import cmath
import math

import numpy as np


def morlet(t, f, w):
    """Closed-form complex Morlet value at time t (seconds)."""
    s_t = w / (2 * math.pi * f)
    amp = (s_t * (2 * math.pi) ** -0.5) ** -0.5
    return amp * cmath.exp(2j * math.pi * f * t) * math.exp(-t * t / (2 * s_t * s_t))


def half_width(f, w, rate, trunc=4.0):
    return math.ceil(trunc * (w / (2 * math.pi * f)) * rate)


def naive_cwt_magnitude(x, f, w, rate, eps=1e-12, trunc=4.0):
    """Direct O(T*K) inner products with conj(psi), zero outside the signal."""
    T = len(x)
    K = half_width(f, w, rate, trunc)
    out = np.empty(T)
    for tau in range(T):
        acc = 0j
        for t in range(max(0, tau - K), min(T, tau + K + 1)):
            acc += x[t] * morlet((t - tau) / rate, f, w).conjugate()
        out[tau] = math.sqrt(acc.real ** 2 + acc.imag ** 2 + eps)
    return out


def central_difference(fn, x0, h):
    return (fn(x0 + h) - fn(x0 - h)) / (2 * h)


def naive_conv1d(x, W, b):
    """Same-length zero-padded cross-correlation; x (B, C, T), W (O, C, k)."""
    B, C, T = x.shape
    O, _, k = W.shape
    p = k // 2
    y = np.zeros((B, O, T))
    for bi in range(B):
        for o in range(O):
            for t in range(T):
                s = b[o]
                for c in range(C):
                    for i in range(k):
                        src = t + i - p
                        if 0 <= src < T:
                            s += W[o, c, i] * x[bi, c, src]
                y[bi, o, t] = s
    return y


def naive_maxpool(x, width):
    B, C, T = x.shape
    n = T // width
    y = np.zeros((B, C, n))
    for bi in range(B):
        for c in range(C):
            for j in range(n):
                y[bi, c, j] = max(x[bi, c, j * width:(j + 1) * width])
    return y
