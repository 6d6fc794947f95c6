"""Patch ingestion and slicing of 2D patches into labelled 1D signals."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import read_json
from .errors import DomainError, FormatError
from .pgm import read_pgm

PATCH_SIZE = 128
SLICE_RATE = 128.0
LABELS = {"cloud": 0, "wave": 1}


@dataclass
class LabeledPatch:
    pixels: np.ndarray
    label: int
    source_id: str = ""


@dataclass
class SliceDataset:
    signals: np.ndarray          # (N, 1, 128)
    labels: np.ndarray           # (N,)
    manifest: list = field(default_factory=list)
    sample_rate: float = SLICE_RATE

    def __len__(self):
        return len(self.labels)


def parse_label(label) -> int:
    if isinstance(label, str):
        try:
            return LABELS[label.lower()]
        except KeyError:
            raise FormatError(f"label: unknown patch label {label!r}") from None
    if label in (0, 1):
        return int(label)
    raise FormatError(f"label: unknown patch label {label!r}")


def load_patch(path, label, size=PATCH_SIZE) -> LabeledPatch:
    pixels, maxval = read_pgm(path)
    if maxval != 255:
        raise FormatError(f"maxval: expected 255, got {maxval} in {path}")
    h, w = pixels.shape
    if w != size:
        raise FormatError(f"width: expected {size}, got {w} in {path}")
    if h != size:
        raise FormatError(f"height: expected {size}, got {h} in {path}")
    return LabeledPatch(pixels / 255.0, parse_label(label), str(path))


def load_patch_manifest(path):
    """Read a ``[{path, label, split?}]`` manifest; paths resolve relative to it.

    Returns a dict mapping split name (default ``train``) to patches.
    """
    entries = read_json(path)
    if not isinstance(entries, list):
        raise FormatError(f"{path}: manifest must be a JSON list")
    base = Path(path).parent
    splits: dict[str, list[LabeledPatch]] = {}
    for i, e in enumerate(entries):
        if "path" not in e or "label" not in e:
            raise FormatError(f"{path}: entry {i} needs 'path' and 'label'")
        p = Path(e["path"])
        patch = load_patch(p if p.is_absolute() else base / p, e["label"])
        patch.source_id = e.get("id", e["path"])
        splits.setdefault(e.get("split", "train"), []).append(patch)
    return splits


def slice_patch(p: LabeledPatch):
    """Rows top-to-bottom, then columns left-to-right.

    Returns ``(signals, labels, manifest)`` with signals of shape (2n, n).
    """
    px = np.asarray(p.pixels, dtype=np.float64)
    if px.ndim != 2 or px.shape[0] != px.shape[1]:
        raise DomainError(f"patch must be square, got {px.shape}")
    n = px.shape[0]
    signals = np.concatenate([px, px.T.copy()], axis=0)
    labels = np.full(2 * n, p.label, dtype=np.int64)
    manifest = ([{"patch": p.source_id, "orientation": "h", "index": i} for i in range(n)]
                + [{"patch": p.source_id, "orientation": "v", "index": j} for j in range(n)])
    return signals, labels, manifest


def build_slice_dataset(patches, rng, sample_rate=SLICE_RATE) -> SliceDataset:
    """Pool all slices, shuffle, and truncate both classes to the smaller count."""
    counts = [sum(1 for p in patches if p.label == c) for c in (0, 1)]
    if min(counts) == 0:
        raise DomainError(f"need at least one patch per class, got counts {counts}")
    sigs, labs, man = [], [], []
    for p in patches:
        s, l, m = slice_patch(p)
        sigs.append(s)
        labs.append(l)
        man.extend(m)
    signals = np.concatenate(sigs)
    labels = np.concatenate(labs)
    order = rng.permutation(len(labels))
    keep_per_class = min(np.sum(labels == 0), np.sum(labels == 1))
    seen = [0, 0]
    kept = []
    for i in order:
        c = labels[i]
        if seen[c] < keep_per_class:
            seen[c] += 1
            kept.append(i)
    kept = np.asarray(kept)
    return SliceDataset(signals[kept][:, None, :], labels[kept], [man[i] for i in kept], sample_rate)
