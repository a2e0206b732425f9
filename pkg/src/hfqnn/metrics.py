"""Binary confusion matrix and derived metrics. Positive class is attack (1)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DataError

AVERAGING = "positive-class"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def transpose(self) -> "ConfusionMatrix":
        """Matrix obtained by swapping predictions and ground truth."""
        return ConfusionMatrix(self.tp, self.tn, self.fn, self.fp)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    # names of metrics whose denominator was zero (reported as 0.0)
    undefined: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        d = asdict(self)
        d["undefined"] = list(self.undefined)
        return d


def _as_binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise DataError(f"{name} must be a 1-D label vector, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise DataError(f"{name} contains values outside {{0, 1}}")
    return arr.astype(np.int64)


def confusion(pred, truth) -> ConfusionMatrix:
    p, t = _as_binary(pred, "pred"), _as_binary(truth, "truth")
    if p.shape != t.shape:
        raise DataError(f"pred has {p.size} entries but truth has {t.size}")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def derive(cm: ConfusionMatrix) -> Metrics:
    if cm.total <= 0:
        raise DataError("cannot derive metrics from an empty confusion matrix")
    undefined = []
    accuracy = (cm.tp + cm.tn) / cm.total
    if cm.tp + cm.fp:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if cm.tp + cm.fn:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall = 0.0
        undefined.append("recall")
    if undefined or precision + recall == 0:
        f1 = 0.0
        undefined.append("f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics(accuracy, precision, recall, f1, tuple(undefined))


def evaluate(pred, truth) -> tuple[ConfusionMatrix, Metrics]:
    cm = confusion(pred, truth)
    return cm, derive(cm)
