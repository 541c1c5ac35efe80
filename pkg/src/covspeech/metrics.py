"""Confusion matrix and Unweighted Average Recall."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MissingClass

NEGATIVE, POSITIVE = 0, 1


@dataclass
class Confusion:
    """2x2 counts indexed [true][predicted], classes {negative=0, positive=1}."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=np.int64))

    @classmethod
    def from_pairs(cls, y_true, y_pred) -> "Confusion":
        c = cls()
        for t, p in zip(y_true, y_pred, strict=True):
            c.counts[int(t), int(p)] += 1
        return c

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def recalls(c: Confusion) -> tuple[float, float]:
    per_class = []
    for cls in (NEGATIVE, POSITIVE):
        row = c.counts[cls]
        n = row.sum()
        if n == 0:
            raise MissingClass(f"no items with true class {cls}")
        per_class.append(float(row[cls] / n))
    return tuple(per_class)


def uar(c: Confusion) -> float:
    """Mean of per-class recalls; insensitive to class imbalance."""
    neg, pos = recalls(c)
    return 0.5 * (neg + pos)


def uar_percent(value: float) -> str:
    # Table-style formatting: percent, one decimal
    return f"{100.0 * value:.1f}"


def report(c: Confusion) -> dict:
    neg, pos = recalls(c)
    return {
        "uar": uar(c),
        "recalls": [neg, pos],
        "confusion": c.counts.tolist(),
    }
