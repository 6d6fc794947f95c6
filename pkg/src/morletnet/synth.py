"""Synthetic two-class signals and the 2D wave/cloud proxy patches."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .dataio import SignalSet
from .errors import DomainError

CLASS_NAMES = ("A", "B")


@dataclass
class SyntheticConfig:
    sample_rate: float = 256.0
    duration: float = 0.80
    f_b: float = 9.0
    f0: float = 5.0
    f1: float = 15.0
    sigma_env: float = 0.8
    noise_std: float = 0.5
    # None means: same noise level as the training split
    test_noise_std: float | None = None
    n_train: int = 240
    n_test: int = 60
    seed: int = 0

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def validate(self):
        if self.sample_rate <= 0 or self.duration <= 0 or self.sigma_env <= 0:
            raise DomainError("sample_rate, duration and sigma_env must be positive")
        if self.noise_std < 0 or (self.test_noise_std is not None and self.test_noise_std < 0):
            raise DomainError("noise levels must be non-negative")
        for n in (self.n_train, self.n_test):
            if n < 2 or n % 2:
                raise DomainError("split sizes must be positive and even (equal classes)")

    def to_dict(self):
        return asdict(self)


@dataclass
class LabeledSignal:
    values: np.ndarray
    label: int
    provenance: dict = field(default_factory=dict)


def _class_index(cls) -> int:
    if cls in (0, 1):
        return int(cls)
    if isinstance(cls, str) and cls.upper() in CLASS_NAMES:
        return CLASS_NAMES.index(cls.upper())
    raise DomainError(f"unknown class {cls!r}")


def event_envelope(t, mu, sigma):
    return np.exp(-(t - mu) ** 2 / (2 * sigma ** 2)) / (sigma * math.sqrt(2 * math.pi))


def generate_signal(cls, cfg: SyntheticConfig, rng, *, noise_std=None, mu=None,
                    phi0=None, phi1=None, noise=None, event=True) -> LabeledSignal:
    """Background sine plus a Gaussian-windowed event sinusoid plus noise.

    Unspecified random quantities are drawn from ``rng`` in the order
    phi0, phi1, mu, noise.  ``event=False`` drops the event term.
    """
    label = _class_index(cls)
    n = cfg.n_samples
    t = np.arange(n) / cfg.sample_rate
    if phi0 is None:
        phi0 = rng.uniform(0.0, 2 * math.pi)
    if phi1 is None:
        phi1 = rng.uniform(0.0, 2 * math.pi)
    if mu is None:
        mu = rng.uniform(0.0, cfg.duration)
    sd = cfg.noise_std if noise_std is None else noise_std
    if noise is None:
        noise = rng.normal(0.0, 1.0, size=n) * sd if sd > 0 else np.zeros(n)
    f_event = (cfg.f0, cfg.f1)[label]
    y = np.sin(2 * math.pi * cfg.f_b * t + phi0)
    if event:
        y = y + event_envelope(t, mu, cfg.sigma_env) * np.sin(2 * math.pi * f_event * t + phi1)
    y = y + noise
    return LabeledSignal(values=y, label=label,
                         provenance={"mu": float(mu), "phi0": float(phi0), "phi1": float(phi1),
                                     "f_event": f_event, "noise_std": float(sd)})


def _split(cfg, rng, n, noise_std):
    labels = np.repeat([0, 1], n // 2)
    labels = labels[rng.permutation(n)]
    return [generate_signal(int(c), cfg, rng, noise_std=noise_std) for c in labels]


def make_dataset(cfg: SyntheticConfig):
    """Balanced train and test splits, deterministic in ``cfg.seed``."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    test_sd = cfg.noise_std if cfg.test_noise_std is None else cfg.test_noise_std
    train = _split(cfg, rng, cfg.n_train, cfg.noise_std)
    test = _split(cfg, rng, cfg.n_test, test_sd)
    return train, test


def to_signal_set(signals: list[LabeledSignal]) -> SignalSet:
    X = np.stack([s.values for s in signals])[:, None, :]
    return SignalSet(X, np.array([s.label for s in signals], dtype=np.int64))


# --------------------------------------------------------------------------
# proxy imagery

PATCH_CLASSES = ("cloud", "wave")


def _unit(field_):
    field_ = field_ - field_.mean()
    sd = field_.std()
    return field_ / sd if sd > 0 else field_


def _rescale(p):
    lo, hi = p.min(), p.max()
    if hi - lo <= 0:
        return np.zeros_like(p)
    return (p - lo) / (hi - lo)


def generate_proxy_patch(cls, rng, size=128, *, noise_std=0.3, background_amp=0.5,
                         wavelength=None, orientation=None, return_params=False):
    """A synthetic stand-in for a labelled satellite patch, rescaled to [0, 1].

    ``wave`` is an oriented plane wave (wavelength 4 to 40 px) over a smooth
    background; ``cloud`` is a moving-average-smoothed random field.  Both
    get additive Gaussian noise.
    """
    if size < 8:
        raise DomainError("patch size must be at least 8")
    if isinstance(cls, str):
        if cls not in PATCH_CLASSES:
            raise DomainError(f"unknown patch class {cls!r}")
        label = PATCH_CLASSES.index(cls)
    else:
        label = int(cls)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    background = _unit(uniform_filter(rng.normal(size=(size, size)), size=size // 2, mode="wrap"))
    params = {"label": label}
    if label == 1:
        lam = rng.uniform(4.0, 40.0) if wavelength is None else float(wavelength)
        theta = rng.uniform(0.0, math.pi) if orientation is None else float(orientation)
        phase = rng.uniform(0.0, 2 * math.pi)
        k = 2 * math.pi / lam
        signal = np.sin(k * (xx * math.cos(theta) + yy * math.sin(theta)) + phase)
        params.update(wavelength=lam, orientation=theta, phase=phase)
    else:
        width = int(rng.integers(4, 17))
        signal = _unit(uniform_filter(rng.normal(size=(size, size)), size=width, mode="wrap"))
        params.update(smoothing=width)
    patch = signal + background_amp * background
    if noise_std > 0:
        patch = patch + rng.normal(0.0, noise_std, size=(size, size))
    patch = _rescale(patch)
    return (patch, params) if return_params else patch
