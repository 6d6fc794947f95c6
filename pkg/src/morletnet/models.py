"""The four architectures, parameter bookkeeping and JSON (de)serialization."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ContractError, FormatError, InvariantError
from .layers import (
    BatchNorm1d,
    Conv1d,
    Dense,
    Flatten,
    Layer,
    MaxPool1d,
    Standardize,
    Tanh,
    WaveletLayer,
    softmax,
)

KINDS = ("wavenet", "fcnet", "convnet", "banknet")
MODEL_FORMAT = "morletnet-model/1"
FLATTEN_ORDER = "channel-major"


@dataclass
class ModelSpec:
    kind: str
    input_length: int
    n_classes: int = 2
    sample_rate: float = 256.0
    frequencies: list = field(default_factory=list)
    width: float = 10.0
    f_trainable: bool = True
    w_trainable: bool = False
    hidden: list = field(default_factory=list)
    conv_channels: list = field(default_factory=lambda: [4, 8])
    kernel_size: int = 3
    pool_width: int = 2
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def validate(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.input_length < 1 or self.n_classes < 2:
            raise ContractError("input_length must be >= 1 and n_classes >= 2")
        if any(h < 1 for h in self.hidden):
            raise ContractError("hidden layer sizes must be positive")
        if self.kind in ("wavenet", "banknet") and len(self.frequencies) < 1:
            raise ContractError(f"{self.kind} needs at least one wavelet filter")
        if self.kind == "banknet" and (self.f_trainable or self.w_trainable):
            raise ContractError("banknet filters are fixed preprocessing; set f_trainable "
                                "and w_trainable to false")
        if self.kind == "convnet":
            n = self.input_length
            for _ in self.conv_channels:
                n //= self.pool_width
            if n < 1:
                raise ContractError(f"input_length {self.input_length} too short for the conv stack")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown model spec field(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class ParamRef:
    key: str
    layer: Layer
    name: str

    @property
    def value(self) -> np.ndarray:
        return self.layer.params[self.name]

    @property
    def grad(self) -> np.ndarray:
        return self.layer.grads[self.name]

    @property
    def mask(self) -> np.ndarray:
        m = self.layer.masks.get(self.name)
        return np.ones(self.value.shape, dtype=bool) if m is None else m

    @property
    def group(self) -> int:
        return self.layer.group


class Model:
    """A layer stack.  The first ``frozen_prefix`` layers hold no trainable
    state and may be evaluated once up front (bank-net preprocessing)."""

    def __init__(self, spec: ModelSpec, layers: list[Layer], frozen_prefix: int = 0):
        self.spec = spec
        self.layers = layers
        self.frozen_prefix = frozen_prefix

    @property
    def kind(self):
        return self.spec.kind

    def forward(self, x, train=False, start=0):
        for layer in self.layers[start:]:
            x = layer.forward(x, train=train)
        return x

    def backward(self, g, stop=0):
        for layer in reversed(self.layers[stop:]):
            g = layer.backward(g)
        return g

    def prefix(self, x):
        return self.forward_range(x, 0, self.frozen_prefix)

    def forward_range(self, x, start, stop):
        for layer in self.layers[start:stop]:
            x = layer.forward(x, train=False)
        return x

    def predict_proba(self, x, batch_size=1024):
        x = np.asarray(x, dtype=np.float64)
        out = [softmax(self.forward(x[i:i + batch_size], train=False))
               for i in range(0, len(x), batch_size)]
        return np.concatenate(out)

    def parameters(self) -> list[ParamRef]:
        refs = []
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                ref = ParamRef(f"{i}.{name}", layer, name)
                if np.any(ref.mask):
                    refs.append(ref)
        return refs

    def wavelet_layers(self) -> list[WaveletLayer]:
        return [l for l in self.layers if isinstance(l, WaveletLayer)]

    def wavelet_values(self):
        """Current ``(f, w)`` arrays of the first wavelet layer, or empty arrays."""
        wl = self.wavelet_layers()
        if not wl:
            return np.zeros(0), np.zeros(0)
        return wl[0].params["f"].copy(), wl[0].params["w"].copy()

    def clip(self):
        for wl in self.wavelet_layers():
            wl.clip()

    def check_box(self):
        for wl in self.wavelet_layers():
            for j, p in enumerate(wl.filters):
                if not p.in_box():
                    raise InvariantError(f"filter {j} left the clip box: f={p.f}, w={p.w}")

    # ------------------------------------------------------------------
    def to_dict(self):
        layers = []
        for layer in self.layers:
            d = {"type": type(layer).__name__,
                 "params": {k: v.tolist() for k, v in layer.params.items()}}
            if isinstance(layer, BatchNorm1d):
                d["running_mean"] = layer.running_mean.tolist()
                d["running_var"] = layer.running_var.tolist()
            if isinstance(layer, Standardize):
                d["mean"] = layer.mean.tolist()
                d["std"] = layer.std.tolist()
            layers.append(d)
        return {"format": MODEL_FORMAT, "spec": self.spec.to_dict(),
                "flatten_order": FLATTEN_ORDER, "sample_rate": self.spec.sample_rate,
                "layers": layers}

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise FormatError(f"format: expected {MODEL_FORMAT!r}, got {d.get('format')!r}")
        if d.get("flatten_order") != FLATTEN_ORDER:
            raise FormatError(f"flatten_order: expected {FLATTEN_ORDER!r}")
        model = build_model(ModelSpec.from_dict(d["spec"]), rng=None)
        if len(d["layers"]) != len(model.layers):
            raise FormatError("layers: count does not match the spec")
        for layer, ld in zip(model.layers, d["layers"]):
            if ld["type"] != type(layer).__name__:
                raise FormatError(f"layers: expected {type(layer).__name__}, got {ld['type']}")
            for k in layer.params:
                arr = np.asarray(ld["params"][k], dtype=np.float64)
                if arr.shape != layer.params[k].shape:
                    raise FormatError(f"layers: parameter {k} has shape {arr.shape}")
                layer.params[k] = arr
            if isinstance(layer, BatchNorm1d):
                layer.running_mean = np.asarray(ld["running_mean"], dtype=np.float64)
                layer.running_var = np.asarray(ld["running_var"], dtype=np.float64)
            if isinstance(layer, Standardize):
                layer.mean = np.asarray(ld["mean"], dtype=np.float64)
                layer.std = np.asarray(ld["std"], dtype=np.float64)
            layer.zero_grad()
        return model


def _dense_stack(n_in, hidden, n_out, rng):
    layers = []
    for h in hidden:
        layers += [Dense(n_in, h, rng), Tanh()]
        n_in = h
    layers.append(Dense(n_in, n_out, rng))
    return layers


def build_model(spec: ModelSpec, rng) -> Model:
    """Assemble a model; ``rng=None`` leaves weights at zero (for loading)."""
    spec.validate()
    T, C = spec.input_length, spec.n_classes
    if spec.kind == "wavenet":
        F = len(spec.frequencies)
        layers = [WaveletLayer(spec.frequencies, spec.width, spec.sample_rate,
                               f_trainable=spec.f_trainable, w_trainable=spec.w_trainable),
                  BatchNorm1d(F, eps=spec.bn_eps, momentum=spec.bn_momentum),
                  Flatten()]
        layers += _dense_stack(F * T, spec.hidden, C, rng)
        return Model(spec, layers)
    if spec.kind == "fcnet":
        return Model(spec, [Flatten()] + _dense_stack(T, spec.hidden, C, rng))
    if spec.kind == "convnet":
        layers, c_in, n = [], 1, T
        for c_out in spec.conv_channels:
            layers += [Conv1d(c_in, c_out, spec.kernel_size, rng), Tanh(), MaxPool1d(spec.pool_width)]
            c_in, n = c_out, n // spec.pool_width
        layers.append(Flatten())
        layers += _dense_stack(c_in * n, spec.hidden, C, rng)
        return Model(spec, layers)
    # banknet
    F = len(spec.frequencies)
    layers = [WaveletLayer(spec.frequencies, spec.width, spec.sample_rate,
                           f_trainable=False, w_trainable=False),
              Standardize(np.zeros((F, T)), np.ones((F, T))),
              Flatten()]
    layers += _dense_stack(F * T, spec.hidden, C, rng)
    return Model(spec, layers, frozen_prefix=2)


# --------------------------------------------------------------------------
# presets

def preset_spec(kind: str, preset: str) -> ModelSpec:
    """Architecture defaults for the ``simplified`` and ``gw`` experiments."""
    if preset == "simplified":
        base = dict(input_length=205, sample_rate=256.0, frequencies=[8.0, 12.0], width=10.0)
        hidden = {"wavenet": [], "fcnet": [10, 10], "convnet": [], "banknet": []}
    elif preset == "gw":
        freqs = np.linspace(1.5, 25.0, 20).tolist()
        base = dict(input_length=128, sample_rate=128.0, frequencies=freqs, width=10.0)
        hidden = {"wavenet": [5], "fcnet": [20, 20], "convnet": [], "banknet": [5]}
    else:
        raise ContractError(f"unknown preset {preset!r}; expected 'simplified' or 'gw'")
    if kind not in KINDS:
        raise ContractError(f"unknown model kind {kind!r}")
    spec = ModelSpec(kind=kind, hidden=hidden[kind], w_trainable=False, **base)
    if kind in ("fcnet", "convnet"):
        spec.frequencies = []
    if kind == "banknet":
        spec.f_trainable = False
    return spec
