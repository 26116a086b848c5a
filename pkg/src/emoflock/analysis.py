"""Confusion-matrix normalization for perception-study responses.

Rows are the displayed emotion, columns the emotion a viewer associated with
it. Normalization is per column: each count is divided by its column total, so
every non-degenerate column of the output sums to one.
"""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np

from .emotions import Emotion

# Study row/column order (differs from the canonical tie-break order).
STUDY_ORDER: tuple[Emotion, ...] = (
    Emotion.JOY,
    Emotion.DISGUST,
    Emotion.TRUST,
    Emotion.ANGER,
    Emotion.SURPRISE,
    Emotion.ANTICIPATION,
    Emotion.SADNESS,
    Emotion.FEAR,
)


def normalize_confusion(counts: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    """Column-normalize an 8x8 response count matrix.

    Returns (normalized matrix, indices of zero-total columns). Zero-total
    columns come back as zero columns; an all-zero matrix is an error.
    """
    c = np.asarray(counts, dtype=float)
    if c.shape != (8, 8):
        raise ValueError(f"expected an 8x8 count matrix, got shape {c.shape}")
    if (c < 0).any():
        raise ValueError("counts must be non-negative")
    totals = c.sum(axis=0)
    if not totals.any():
        raise ValueError("all-zero count matrix cannot be normalized")
    zero_cols = tuple(int(i) for i in np.flatnonzero(totals == 0))
    safe = np.where(totals > 0, totals, 1.0)
    return c / safe, zero_cols


def read_counts_csv(path: str) -> np.ndarray:
    """Read a labeled 8x8 counts CSV (header row + leading label column)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty counts file")
    header = [h.strip().lower() for h in rows[0][1:]]
    expected = [e.value for e in STUDY_ORDER]
    if header != expected:
        raise ValueError(f"{path}: header columns must be {expected}, got {header}")
    matrix = np.zeros((8, 8))
    if len(rows) != 9:
        raise ValueError(f"{path}: expected 8 data rows, got {len(rows) - 1}")
    for r, row in enumerate(rows[1:]):
        if row[0].strip().lower() != expected[r]:
            raise ValueError(f"{path}: row {r + 1} label must be {expected[r]!r}")
        values = row[1:]
        if len(values) != 8:
            raise ValueError(f"{path}: row {r + 1} needs 8 values")
        matrix[r] = [float(v) for v in values]
    return matrix


def write_matrix_csv(path: str, matrix: np.ndarray, decimals: int | None = None) -> None:
    labels = [e.value for e in STUDY_ORDER]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + labels)
        for label, row in zip(labels, np.asarray(matrix)):
            if decimals is None:
                writer.writerow([label] + [repr(float(v)) for v in row])
            else:
                writer.writerow([label] + [f"{v:.{decimals}f}" for v in row])
