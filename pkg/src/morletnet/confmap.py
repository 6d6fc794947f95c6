"""Wave-confidence maps built from per-slice probabilities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .imagery import LabeledPatch, slice_patch

WAVE = 1


@dataclass
class ConfidenceMap:
    values: np.ndarray  # values[i, j] = row_probs[i] * col_probs[j]
    row_probs: np.ndarray
    col_probs: np.ndarray

    def header(self):
        return {"layout": "values[i][j] = row_probs[i] * col_probs[j]",
                "rows": "i indexes image rows (horizontal slices)",
                "cols": "j indexes image columns (vertical slices)",
                "row_probs": self.row_probs.tolist(),
                "col_probs": self.col_probs.tolist()}


def outer_map(row_probs, col_probs) -> ConfidenceMap:
    r = np.asarray(row_probs, dtype=np.float64)
    c = np.asarray(col_probs, dtype=np.float64)
    return ConfidenceMap(np.outer(r, c), r, c)


def confidence_map(model, patch: LabeledPatch) -> ConfidenceMap:
    """P(wave) for every row and column slice, combined by an outer product."""
    n = model.spec.input_length
    if patch.pixels.shape != (n, n):
        raise ContractError(f"patch shape {patch.pixels.shape} does not match model input {n}")
    signals, _, _ = slice_patch(patch)
    probs = model.predict_proba(signals[:, None, :])[:, WAVE]
    return outer_map(probs[:n], probs[n:])
