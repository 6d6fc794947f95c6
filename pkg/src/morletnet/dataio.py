"""CSV and JSON helpers shared by the generators, slicer and CLI.

Dataset CSVs have one row per signal: the integer label followed by the
signal values.  Floats in CSV are written with 17 significant digits so a
read-back is exact.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import FormatError


class SignalSet(NamedTuple):
    signals: np.ndarray  # (N, 1, T)
    labels: np.ndarray   # (N,)

    def __len__(self):
        return len(self.labels)


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_dataset_csv(path, signals, labels):
    signals = np.asarray(signals, dtype=np.float64)
    signals = signals.reshape(signals.shape[0], -1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for label, row in zip(labels, signals):
            writer.writerow([int(label)] + [fmt(v) for v in row])


def read_dataset_csv(path) -> SignalSet:
    labels, rows = [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            try:
                labels.append(int(rec[0]))
                rows.append([float(v) for v in rec[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: no signals")
    if len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: rows have differing lengths")
    X = np.asarray(rows, dtype=np.float64)[:, None, :]
    return SignalSet(X, np.asarray(labels, dtype=np.int64))


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_rows_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, (int, str)) else fmt(v) for v in row])
