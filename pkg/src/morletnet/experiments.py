"""Seeded end-to-end runs for the two presets.

A trial seed drives data generation, weight initialization and batch
shuffling through independent streams (see :func:`derive_rngs`).
"""
from __future__ import annotations

from dataclasses import replace
from itertools import permutations

import numpy as np

from .imagery import LabeledPatch, build_slice_dataset
from .dataio import SignalSet
from .models import build_model, preset_spec
from .synth import SyntheticConfig, generate_proxy_patch, make_dataset, to_signal_set
from .training import derive_rngs, preset_train_config, summarize, train


def simplified_data(seed: int, **overrides):
    cfg = replace(SyntheticConfig(seed=seed), **overrides)
    tr, te = make_dataset(cfg)
    return to_signal_set(tr), to_signal_set(te)


def proxy_patches(rng, n_wave=20, n_cloud=20, test_fraction=0.25, **patch_kw):
    """Generate labelled proxy patches and hold out whole patches for testing.

    Returns ``(train_patches, test_patches)``.
    """
    splits = {"train": [], "test": []}
    for label, count in ((1, n_wave), (0, n_cloud)):
        n_test = int(round(count * test_fraction))
        for i in range(count):
            px = generate_proxy_patch(label, rng, **patch_kw)
            name = ("wave" if label else "cloud") + f"_{i:03d}"
            split = "test" if i >= count - n_test else "train"
            splits[split].append(LabeledPatch(px, label, name))
    return splits["train"], splits["test"]


def proxy_data(rng, n_wave=20, n_cloud=20, test_fraction=0.25, **patch_kw):
    train_p, test_p = proxy_patches(rng, n_wave, n_cloud, test_fraction, **patch_kw)
    tr = build_slice_dataset(train_p, rng)
    te = build_slice_dataset(test_p, rng)
    return SignalSet(tr.signals, tr.labels), SignalSet(te.signals, te.labels)


def run_trial(kind: str, preset: str, seed: int, *, spec_overrides=None, train_overrides=None,
              data_overrides=None, data=None, on_step=None):
    """Build, train and evaluate one model; returns ``(model, report)``."""
    data_rng, init_rng, shuffle_seed = derive_rngs(seed)
    if data is None:
        if preset == "simplified":
            data = simplified_data(seed, **(data_overrides or {}))
        else:
            data = proxy_data(data_rng, **(data_overrides or {}))
    spec = replace(preset_spec(kind, preset), **(spec_overrides or {}))
    cfg = replace(preset_train_config(preset, seed=shuffle_seed), **(train_overrides or {}))
    model = build_model(spec, init_rng)
    report = train(model, data[0], data[1], cfg, on_step=on_step)
    report.seed = seed
    return model, report


def run_trials(kind: str, preset: str, seeds, **kwargs):
    """Run :func:`run_trial` for every seed; returns ``(reports, summary)``."""
    reports = [run_trial(kind, preset, s, **kwargs)[1] for s in seeds]
    acc = [r.final_test.accuracy for r in reports]
    summary = {"kind": kind, "preset": preset, "seeds": list(seeds),
               "test_accuracy": summarize(acc), "per_seed_accuracy": acc}
    return reports, summary


def frequency_match(learned, targets=(5.0, 15.0), tol=0.5) -> bool:
    """True when the learned frequencies can be paired one-to-one with the
    targets, each within ``tol``."""
    learned = list(learned)
    if len(learned) != len(targets):
        return False
    return any(all(abs(a - b) <= tol for a, b in zip(perm, targets))
               for perm in permutations(learned))
