"""
Label algebra over a row x column grid.

row = label div C, column = label mod C. The auxiliary 4-class label records
which parts of the main prediction were right:

    0 neither, 1 column (digit) only, 2 row (script) only, 3 both

and the batch factor turns a batch of those codes into a multiplier for the
main loss. Aux codes and the factor are constants for differentiation.
"""
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from errors import ConfigError, LabelRangeError
from tensorcore.functional import argmax_rows

AUX_NONE = 0
AUX_DIGIT_ONLY = 1
AUX_SCRIPT_ONLY = 2
AUX_BOTH = 3
AUX_CLASSES = 4

FACTOR_MODES = ("normalized", "mean", "raw_sum")


@dataclass(frozen=True)
class FactorStat:
    raw_sum: int
    batch_size: int
    factor: float


def decompose_label(label: int, cols: int, rows: Optional[int] = None) -> Tuple[int, int]:
    label = int(label)
    if label < 0 or (rows is not None and label >= rows * cols):
        bound = f"< {rows * cols}" if rows is not None else ">= 0"
        raise LabelRangeError(f"Label {label} out of range (must be {bound})")
    return label // cols, label % cols


def compose_label(row: int, col: int, cols: int, rows: Optional[int] = None) -> int:
    if col < 0 or col >= cols or row < 0 or (rows is not None and row >= rows):
        raise LabelRangeError(f"Grid cell ({row}, {col}) outside {rows or '?'}x{cols}")
    return int(row) * cols + int(col)


def decompose_labels(labels: np.ndarray, cols: int) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized decompose_label: (rows, cols) arrays."""
    labels = np.asarray(labels, dtype=np.int64)
    return labels // cols, labels % cols


def derive_aux_label(predicted: int, true: int, cols: int, rows: Optional[int] = None) -> int:
    pred_row, pred_col = decompose_label(predicted, cols, rows)
    true_row, true_col = decompose_label(true, cols, rows)
    return 2 * int(pred_row == true_row) + int(pred_col == true_col)


def derive_aux_labels(predicted: np.ndarray, true: np.ndarray, cols: int) -> np.ndarray:
    """Vectorized derive_aux_label over equal-length label arrays."""
    predicted = np.asarray(predicted, dtype=np.int64)
    true = np.asarray(true, dtype=np.int64)
    row_ok = (predicted // cols) == (true // cols)
    col_ok = (predicted % cols) == (true % cols)
    return (2 * row_ok + col_ok).astype(np.int64)


def batch_aux_labels(main_logits: np.ndarray, true_labels, cols: int) -> np.ndarray:
    return derive_aux_labels(argmax_rows(main_logits), np.asarray(true_labels), cols)


def compute_factor(aux_labels: Iterable[int], mode: str = "normalized") -> FactorStat:
    aux = np.asarray(list(aux_labels) if not isinstance(aux_labels, np.ndarray) else aux_labels,
                     dtype=np.int64)
    if aux.size == 0:
        raise ValueError("compute_factor needs at least one aux label")
    if aux.min() < AUX_NONE or aux.max() > AUX_BOTH:
        raise LabelRangeError(f"Aux labels must lie in 0..3, got range {aux.min()}..{aux.max()}")
    batch = int(aux.size)
    raw_sum = int(aux.sum())
    if mode == "normalized":
        factor = 1.0 + raw_sum / (3.0 * batch)
    elif mode == "mean":
        factor = raw_sum / (3.0 * batch)
    elif mode == "raw_sum":
        factor = float(raw_sum)
    else:
        raise ConfigError(f"Unknown factor_mode {mode!r}; expected one of {', '.join(FACTOR_MODES)}")
    return FactorStat(raw_sum=raw_sum, batch_size=batch, factor=factor)
