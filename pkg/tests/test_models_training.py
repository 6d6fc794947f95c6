import json

import numpy as np
import pytest

from morletnet.confmap import confidence_map, outer_map
from morletnet.dataio import SignalSet
from morletnet.errors import ContractError, DomainError
from morletnet.imagery import LabeledPatch
from morletnet.layers import wavelet_layer_forward
from morletnet.models import Model, ModelSpec, build_model, preset_spec
from morletnet.training import (
    TrainConfig,
    bank_preprocess,
    evaluate,
    metrics_from_logits,
    train,
)
from morletnet.wavelet import MorletParams


def _toy_data(rng, n=16, T=32):
    t = np.arange(T) / 64.0
    y = np.arange(n) % 2
    f = np.where(y == 1, 12.0, 4.0)
    X = np.sin(2 * np.pi * f[:, None] * t + rng.uniform(0, 6, (n, 1))) + 0.1 * rng.normal(size=(n, T))
    return SignalSet(X[:, None, :], y)


def _small_spec(kind, **kw):
    base = dict(kind=kind, input_length=32, sample_rate=64.0, frequencies=[5.0, 10.0], hidden=[4])
    if kind in ("fcnet", "convnet"):
        base["frequencies"] = []
    if kind == "banknet":
        base["f_trainable"] = False
    base.update(kw)
    return ModelSpec(**base)


# -- construction ------------------------------------------------------------

def test_simplified_wavenet_preset(rng):
    spec = preset_spec("wavenet", "simplified")
    assert spec.frequencies == [8.0, 12.0] and spec.width == 10.0
    assert not spec.w_trainable and spec.hidden == []
    m = build_model(spec, rng)
    assert [type(l).__name__ for l in m.layers] == ["WaveletLayer", "BatchNorm1d", "Flatten", "Dense"]
    assert m.layers[-1].params["W"].shape == (2, 2 * 205)


def test_gw_wavenet_preset(rng):
    spec = preset_spec("wavenet", "gw")
    np.testing.assert_allclose(spec.frequencies, np.linspace(1.5, 25, 20))
    assert spec.hidden == [5] and spec.input_length == 128
    m = build_model(spec, rng)
    assert m.layers[3].params["W"].shape == (5, 20 * 128)


def test_fcnet_presets():
    assert preset_spec("fcnet", "simplified").hidden == [10, 10]
    assert preset_spec("fcnet", "gw").hidden == [20, 20]


def test_convnet_structure(rng):
    m = build_model(preset_spec("convnet", "gw"), rng)
    names = [type(l).__name__ for l in m.layers]
    assert names == ["Conv1d", "Tanh", "MaxPool1d", "Conv1d", "Tanh", "MaxPool1d", "Flatten", "Dense"]
    assert m.layers[0].params["W"].shape == (4, 1, 3)
    assert m.layers[3].params["W"].shape == (8, 4, 3)
    assert m.layers[-1].params["W"].shape == (2, 8 * 32)


def test_banknet_has_no_wavelet_parameters(rng):
    m = build_model(preset_spec("banknet", "gw"), rng)
    assert all(not k.startswith("0.") for k in (r.key for r in m.parameters()))
    assert m.frozen_prefix == 2


@pytest.mark.parametrize("bad", [
    dict(kind="wavenet", input_length=10, frequencies=[]),
    dict(kind="banknet", input_length=10, frequencies=[3.0], f_trainable=True),
    dict(kind="mlp", input_length=10),
    dict(kind="convnet", input_length=3),
])
def test_inconsistent_specs(bad):
    with pytest.raises(ContractError):
        build_model(ModelSpec(**bad), np.random.default_rng(0))


def test_init_bounds():
    m = build_model(ModelSpec(kind="fcnet", input_length=100, hidden=[7]), np.random.default_rng(0))
    W = m.layers[1].params["W"]
    assert np.abs(W).max() <= 0.1
    assert np.abs(W).max() > 0.09


def test_flatten_channel_major(rng):
    spec = _small_spec("wavenet", hidden=[])
    m = build_model(spec, rng)
    x = rng.normal(size=(1, 1, 32))
    feats = m.forward_range(x, 0, 3)
    bn_out = m.forward_range(x, 0, 2)
    np.testing.assert_array_equal(feats[0, :32], bn_out[0, 0])
    np.testing.assert_array_equal(feats[0, 32:], bn_out[0, 1])


@pytest.mark.parametrize("kind", ["wavenet", "fcnet", "convnet", "banknet"])
def test_serialization_round_trip(kind, rng):
    data = _toy_data(rng)
    m = build_model(_small_spec(kind), rng)
    train(m, data, data, TrainConfig(epochs=2, batch_size=8, seed=1))
    doc = json.loads(json.dumps(m.to_dict()))
    assert doc["flatten_order"] == "channel-major"
    m2 = Model.from_dict(doc)
    np.testing.assert_array_equal(m.predict_proba(data.signals), m2.predict_proba(data.signals))


# -- metrics -----------------------------------------------------------------

def _logits_for(pred):
    z = np.zeros((len(pred), 2))
    z[np.arange(len(pred)), pred] = 1.0
    return z


def test_metrics_confusion_example():
    # TP=3, FN=2 for the positive class; FP=1, TN=4
    y = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 0])
    pred = np.array([1, 1, 1, 0, 0, 1, 0, 0, 0, 0])
    m = metrics_from_logits(_logits_for(pred), y)
    assert m.precision[1] == pytest.approx(0.75)
    assert m.recall[1] == pytest.approx(0.6)
    assert m.accuracy == pytest.approx(0.7)
    assert m.confusion == [[4, 1], [2, 3]]
    assert m.accuracy == (m.confusion[0][0] + m.confusion[1][1]) / m.n


def test_metrics_perfect_and_flipped():
    y = np.array([0, 1, 0, 1])
    m = metrics_from_logits(_logits_for(y), y)
    assert (m.accuracy, m.precision, m.recall) == (1.0, [1.0, 1.0], [1.0, 1.0])
    assert metrics_from_logits(_logits_for(1 - y), y).accuracy == 0.0


def test_metrics_ties_go_to_lower_class():
    m = metrics_from_logits(np.zeros((2, 2)), np.array([0, 1]))
    assert m.confusion == [[1, 0], [1, 0]]


def test_evaluate_empty(rng):
    m = build_model(_small_spec("fcnet"), rng)
    with pytest.raises(DomainError):
        evaluate(m, SignalSet(np.zeros((0, 1, 32)), np.zeros(0, dtype=int)))


# -- training ------------------------------------------------------------------

def test_trajectory_and_clip_box(rng):
    data = _toy_data(rng)
    m = build_model(_small_spec("wavenet", w_trainable=True), rng)
    seen = []
    rep = train(m, data, data, TrainConfig(epochs=6, batch_size=4, lr_wavelet=5.0, seed=0),
                on_step=lambda model, s: seen.append(model.wavelet_values()))
    assert len(rep.f_trajectory) == len(rep.epochs) == 7
    assert len(seen) == 6 * 4
    for f, w in seen + list(zip(rep.f_trajectory, rep.w_trajectory)):
        assert np.all((np.asarray(f) >= 0.5) & (np.asarray(f) <= 30))
        assert np.all((np.asarray(w) >= 4) & (np.asarray(w) <= 15))


def test_zero_learning_rates_freeze_everything(rng):
    data = _toy_data(rng)
    m = build_model(_small_spec("wavenet"), rng)
    before = {r.key: r.value.copy() for r in m.parameters()}
    rep = train(m, data, data, TrainConfig(epochs=4, batch_size=8, lr_wavelet=0.0, lr_other=0.0))
    for r in m.parameters():
        np.testing.assert_array_equal(r.value, before[r.key])
    assert len(set(rep.f_trajectory[i][0] for i in range(5))) == 1
    # batch-norm running statistics still move, so only the trainable state is frozen
    assert len(set(rep.test_acc)) >= 1


@pytest.mark.parametrize("kind", ["wavenet", "fcnet", "convnet", "banknet"])
def test_training_is_deterministic(kind):
    def run():
        rng = np.random.default_rng(2)
        data = _toy_data(rng)
        m = build_model(_small_spec(kind), rng)
        return train(m, data, data, TrainConfig(epochs=3, batch_size=5, seed=4)).to_dict()
    assert json.dumps(run()) == json.dumps(run())


def test_zero_epochs_is_initial_evaluation(rng):
    data = _toy_data(rng)
    m = build_model(_small_spec("convnet"), rng)
    rep = train(m, data, data, TrainConfig(epochs=0))
    assert rep.epochs == [0]
    assert rep.final_test.accuracy == evaluate(m, data).accuracy


def test_training_learns_toy_task(rng):
    data = _toy_data(rng, n=40)
    m = build_model(_small_spec("wavenet"), rng)
    rep = train(m, data, data, TrainConfig(epochs=60, batch_size=8, lr_other=0.01))
    assert rep.final_train.accuracy >= 0.9


def test_train_rejects_wrong_length(rng):
    m = build_model(_small_spec("fcnet"), rng)
    bad = SignalSet(np.zeros((4, 1, 31)), np.array([0, 1, 0, 1]))
    with pytest.raises(ContractError):
        train(m, bad, bad, TrainConfig(epochs=1))


def test_divergence_is_reported(rng):
    data = _toy_data(rng)
    m = build_model(_small_spec("fcnet"), rng)
    m.layers[1].params["W"][0, 0] = np.nan
    rep = train(m, data, data, TrainConfig(epochs=3))
    assert rep.status == "diverged"
    assert "non-finite" in rep.diagnostic


# -- bank preprocessing --------------------------------------------------------

def test_bank_preprocess(rng):
    filters = [MorletParams(4.0, 10.0, False, False), MorletParams(12.0, 10.0, False, False)]
    tr = rng.normal(size=(20, 1, 32))
    te = rng.normal(size=(6, 1, 32)) * 2
    feats, (mean, std) = bank_preprocess(tr, filters, 64.0)
    raw, _ = wavelet_layer_forward(tr, filters, 64.0)
    np.testing.assert_allclose(feats * std + mean, raw, atol=1e-12)
    assert np.all(np.abs(feats.mean(axis=0)) < 1e-10)
    te_feats, _ = bank_preprocess(te, filters, 64.0, stats=(mean, std))
    own, _ = bank_preprocess(te, filters, 64.0)
    assert not np.allclose(te_feats, own)


def test_bank_zero_variance_warns():
    filters = [MorletParams(4.0, 10.0, False, False)]
    with pytest.warns(UserWarning, match="zero-variance"):
        _, (_, std) = bank_preprocess(np.ones((5, 1, 16)), filters, 64.0)
    assert np.all(std == 1.0)


# -- confidence maps -----------------------------------------------------------

def test_outer_map_toy():
    cm = outer_map([1.0, 0.0], [0.5, 1.0])
    np.testing.assert_array_equal(cm.values, [[0.5, 1.0], [0.0, 0.0]])


def test_confidence_map_all_ones(rng):
    m = build_model(ModelSpec(kind="fcnet", input_length=128, sample_rate=128.0, hidden=[]), rng)
    m.layers[-1].params["W"][:] = 0.0
    m.layers[-1].params["b"][:] = [-800.0, 800.0]
    cm = confidence_map(m, LabeledPatch(rng.uniform(size=(128, 128)), 1))
    np.testing.assert_array_equal(cm.values, 1.0)


def test_confidence_map_is_outer_product(rng):
    m = build_model(preset_spec("wavenet", "gw"), rng)
    cm = confidence_map(m, LabeledPatch(rng.uniform(size=(128, 128)), 1))
    assert cm.values.shape == (128, 128)
    for _ in range(50):
        i, j = rng.integers(128, size=2)
        assert cm.values[i, j] == cm.row_probs[i] * cm.col_probs[j]
    assert cm.values.min() >= 0.0 and cm.values.max() <= 1.0
    assert cm.values.max() == cm.row_probs.max() * cm.col_probs.max()


def test_confidence_map_size_mismatch(rng):
    m = build_model(preset_spec("fcnet", "gw"), rng)
    with pytest.raises(ContractError):
        confidence_map(m, LabeledPatch(np.zeros((64, 64)), 0))
