"""Training loop, evaluation metrics, bank-net preprocessing and seeded trials."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .dataio import SignalSet
from .errors import ContractError, DomainError, NonFiniteError
from .layers import WaveletLayer, softmax_xent
from .models import Model
from .optim import LR_OTHER, LR_WAVELET, Adam

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 700
    batch_size: int | None = None  # None: full batch
    lr_wavelet: float = LR_WAVELET
    lr_other: float = LR_OTHER
    seed: int = 0
    shuffle: bool = True
    eval_every: int = 1

    def validate(self):
        if self.epochs < 0:
            raise ContractError("epochs must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ContractError("batch_size must be positive")
        if self.eval_every < 1:
            raise ContractError("eval_every must be positive")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown train config field(s): {sorted(unknown)}")
        return cls(**d)


def preset_train_config(preset: str, seed: int = 0) -> TrainConfig:
    if preset == "simplified":
        return TrainConfig(epochs=700, batch_size=None, seed=seed)
    if preset == "gw":
        return TrainConfig(epochs=10, batch_size=128, seed=seed)
    raise ContractError(f"unknown preset {preset!r}")


@dataclass
class Metrics:
    accuracy: float
    precision: list
    recall: list
    confusion: list  # confusion[true][predicted]
    loss: float
    n: int

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainReport:
    seed: int
    model_kind: str
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    f_trajectory: list = field(default_factory=list)  # per recorded epoch, one value per filter
    w_trajectory: list = field(default_factory=list)
    final_train: Metrics | None = None
    final_test: Metrics | None = None
    status: str = "ok"
    diagnostic: str = ""

    def to_dict(self):
        return asdict(self)

    def curve_rows(self):
        """Header and rows for the learning-curve CSV."""
        n_f = len(self.f_trajectory[0]) if self.f_trajectory else 0
        header = (["epoch", "train_loss", "test_loss", "train_acc", "test_acc"]
                  + [f"f_{i + 1}" for i in range(n_f)] + [f"w_{i + 1}" for i in range(n_f)])
        rows = []
        for i, ep in enumerate(self.epochs):
            rows.append([ep, self.train_loss[i], self.test_loss[i], self.train_acc[i],
                         self.test_acc[i], *self.f_trajectory[i], *self.w_trajectory[i]])
        return header, rows


def _predict_logits(model: Model, x, start=0, batch_size=1024):
    return np.concatenate([model.forward(x[i:i + batch_size], train=False, start=start)
                           for i in range(0, len(x), batch_size)])


def metrics_from_logits(logits, labels) -> Metrics:
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DomainError("cannot evaluate an empty dataset")
    C = logits.shape[1]
    loss, _ = softmax_xent(logits, labels)
    pred = np.argmax(logits, axis=1)  # first maximum: ties go to the lower class
    conf = np.zeros((C, C), dtype=np.int64)
    np.add.at(conf, (labels, pred), 1)
    tp = np.diag(conf).astype(np.float64)
    predicted = conf.sum(axis=0)
    actual = conf.sum(axis=1)
    precision = [float(tp[c] / predicted[c]) if predicted[c] else 0.0 for c in range(C)]
    recall = [float(tp[c] / actual[c]) if actual[c] else 0.0 for c in range(C)]
    return Metrics(accuracy=float(tp.sum() / len(labels)), precision=precision, recall=recall,
                   confusion=conf.tolist(), loss=loss, n=int(len(labels)))


def evaluate(model: Model, data: SignalSet) -> Metrics:
    """Accuracy, per-class precision/recall and confusion counts (eval mode)."""
    if len(data.labels) == 0:
        raise DomainError("cannot evaluate an empty dataset")
    return metrics_from_logits(_predict_logits(model, data.signals), data.labels)


def bank_preprocess(signals, filters, sample_rate, stats=None):
    """Fixed filter-bank magnitudes, standardized per feature.

    ``stats=None`` fits ``(mean, std)`` on ``signals`` (the training split);
    pass the returned stats to transform any other split.  Returns
    ``(features, (mean, std))`` with features of shape (N, F, T).
    """
    layer = WaveletLayer([p.f for p in filters], [p.w for p in filters], sample_rate,
                         f_trainable=False, w_trainable=False)
    raw = np.concatenate([layer.forward(signals[i:i + 512]) for i in range(0, len(signals), 512)])
    if stats is None:
        mean = raw.mean(axis=0)
        std = raw.std(axis=0)
        # FFT round-off leaves ~1e-16 spread on features that are constant
        flat = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        if np.any(flat):
            warnings.warn(f"{int(flat.sum())} zero-variance bank feature(s); std clamped to 1")
            std = np.where(flat, 1.0, std)
        stats = (mean, std)
    mean, std = stats
    return (raw - mean) / std, stats


def fit_bank_statistics(model: Model, train_signals):
    wl = model.layers[0]
    _, (mean, std) = bank_preprocess(train_signals, wl.filters, wl.sample_rate)
    std_layer = model.layers[1]
    std_layer.mean, std_layer.std = mean, std


def _record(report, model, epoch, tr_feats, train, te_feats, test, start):
    tr = metrics_from_logits(_predict_logits(model, tr_feats, start), train.labels)
    te = metrics_from_logits(_predict_logits(model, te_feats, start), test.labels)
    f, w = model.wavelet_values()
    report.epochs.append(epoch)
    report.train_loss.append(tr.loss)
    report.test_loss.append(te.loss)
    report.train_acc.append(tr.accuracy)
    report.test_acc.append(te.accuracy)
    report.f_trajectory.append(f.tolist())
    report.w_trajectory.append(w.tolist())
    return tr, te


def train(model: Model, train_set: SignalSet, test_set: SignalSet, cfg: TrainConfig,
          on_step=None) -> TrainReport:
    """Mini-batch Adam with two learning rates and wavelet clipping.

    Each step is forward, loss, backward, Adam step, clip.  The model is
    evaluated (eval mode) before the first epoch and after every
    ``cfg.eval_every`` epochs, plus after the last one.  ``on_step(model,
    step_index)`` is called after every clipped update.  A non-finite loss
    or gradient stops training; the report then carries ``status='diverged'``.
    """
    cfg.validate()
    T = model.spec.input_length
    for name, ds in (("train", train_set), ("test", test_set)):
        if ds.signals.ndim != 3 or ds.signals.shape[1:] != (1, T):
            raise ContractError(f"{name} signals have shape {ds.signals.shape}, model expects (N, 1, {T})")
    if model.kind == "banknet":
        fit_bank_statistics(model, train_set.signals)
    start = model.frozen_prefix
    tr_feats = model.prefix(train_set.signals) if start else train_set.signals
    te_feats = model.prefix(test_set.signals) if start else test_set.signals

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model, cfg.lr_wavelet, cfg.lr_other)
    report = TrainReport(seed=cfg.seed, model_kind=model.kind)
    report.final_train, report.final_test = _record(report, model, 0, tr_feats, train_set,
                                                    te_feats, test_set, start)
    N = len(train_set.labels)
    bs = N if cfg.batch_size is None else min(cfg.batch_size, N)
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(N) if cfg.shuffle else np.arange(N)
        try:
            for i in range(0, N, bs):
                idx = order[i:i + bs]
                logits = model.forward(tr_feats[idx], train=True, start=start)
                loss, g = softmax_xent(logits, train_set.labels[idx])
                if not math.isfinite(loss):
                    raise NonFiniteError(f"non-finite loss at epoch {epoch}, step {step}")
                model.backward(g, stop=start)
                opt.step()
                model.clip()
                model.check_box()
                step += 1
                if on_step is not None:
                    on_step(model, step)
        except NonFiniteError as exc:
            report.status = "diverged"
            report.diagnostic = str(exc)
            log.warning("training stopped: %s", exc)
            break
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            report.final_train, report.final_test = _record(
                report, model, epoch, tr_feats, train_set, te_feats, test_set, start)
    return report


def derive_rngs(seed: int):
    """Independent generators for data, initialization and shuffling."""
    data, init, shuffle = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(data), np.random.default_rng(init),
            int(shuffle.generate_state(1)[0]))


def summarize(values):
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "min": float(arr.min()), "max": float(arr.max())}
