"""
Confusion matrices, one-vs-rest tallies and the diagnostic ratios built on them.

Ratios whose denominator is zero are ``None`` ("undefined"), never 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

METRIC_NAMES = ("acc", "pre", "rec", "f1", "mis", "sen", "spe")


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[true][pred]``."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise ValueError(f"confusion matrix must be square k x k, got shape {c.shape}")
        if (c < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass(frozen=True)
class ClassTally:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError(f"tallies must be non-negative: {self}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class ClassMetrics:
    acc: Optional[float]
    pre: Optional[float]
    rec: Optional[float]
    f1: Optional[float]
    mis: Optional[float]
    sen: Optional[float]
    spe: Optional[float]

    def as_dict(self) -> dict[str, Optional[float]]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Aggregate:
    mode: str
    metrics: ClassMetrics
    # metric name -> indices of classes whose value was undefined (macro only)
    excluded: dict[str, list[int]] = field(default_factory=dict)


def confusion_matrix(preds: Sequence[int], labels: Sequence[int], k: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise ValueError(f"{preds.size} predictions but {labels.size} labels")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    for what, arr in (("prediction", preds), ("label", labels)):
        bad = np.flatnonzero((arr < 0) | (arr >= k))
        if bad.size:
            raise ValueError(f"{what} {int(arr[bad[0]])} at position {int(bad[0])} outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts)


def class_tally(cm: ConfusionMatrix, c: int) -> ClassTally:
    """One-vs-rest tally for class `c`."""
    if not 0 <= c < cm.k:
        raise IndexError(f"class {c} outside [0, {cm.k})")
    tp = int(cm.counts[c, c])
    fn = int(cm.counts[c].sum()) - tp
    fp = int(cm.counts[:, c].sum()) - tp
    return ClassTally(tp=tp, tn=cm.total - tp - fn - fp, fp=fp, fn=fn)


def tallies(cm: ConfusionMatrix) -> list[ClassTally]:
    return [class_tally(cm, c) for c in range(cm.k)]


def _ratio(num: int, den: int) -> Optional[Fraction]:
    return Fraction(num, den) if den else None


def _exact_metrics(t: ClassTally) -> dict[str, Optional[Fraction]]:
    if t.total <= 0:
        raise ValueError("tally is empty (total = 0)")
    pre = _ratio(t.tp, t.tp + t.fp)
    rec = _ratio(t.tp, t.tp + t.fn)
    if pre is None or rec is None or pre + rec == 0:
        f1 = None
    else:
        f1 = 2 * pre * rec / (pre + rec)
    return {
        "acc": Fraction(t.tp + t.tn, t.total),
        "pre": pre,
        "rec": rec,
        "f1": f1,
        "mis": Fraction(t.fp + t.fn, t.total),
        "sen": rec,
        "spe": _ratio(t.tn, t.tn + t.fp),
    }


def _to_float(values: dict[str, Optional[Fraction]]) -> ClassMetrics:
    return ClassMetrics(**{k: None if v is None else float(v) for k, v in values.items()})


def class_metrics(t: ClassTally) -> ClassMetrics:
    """ACC, PRE, REC, F1, MIS, SEN, SPE for one tally, from exact rational arithmetic."""
    return _to_float(_exact_metrics(t))


def aggregate(
    per_class: Union[ConfusionMatrix, Sequence[ClassTally]],
    mode: str = "macro",
) -> Aggregate:
    """
    Combine per-class results.

    ``macro`` averages each metric over the classes where it is defined and
    records the excluded classes. ``micro`` pools the tallies; its accuracy is
    ``trace / total`` (the fraction of samples classified correctly) and its
    misclassification rate is the complement.
    """
    if isinstance(per_class, ConfusionMatrix):
        per_class = tallies(per_class)
    per_class = list(per_class)
    if not per_class:
        raise ValueError("aggregate needs at least one class")

    if mode == "macro":
        exact = [_exact_metrics(t) for t in per_class]
        values, excluded = {}, {}
        for name in METRIC_NAMES:
            defined = [m[name] for m in exact if m[name] is not None]
            missing = [i for i, m in enumerate(exact) if m[name] is None]
            if missing:
                excluded[name] = missing
            values[name] = sum(defined) / len(defined) if defined else None
        return Aggregate("macro", _to_float(values), excluded)

    if mode == "micro":
        pooled = ClassTally(
            tp=sum(t.tp for t in per_class),
            tn=sum(t.tn for t in per_class),
            fp=sum(t.fp for t in per_class),
            fn=sum(t.fn for t in per_class),
        )
        values = _exact_metrics(pooled)
        n_samples = per_class[0].total
        values["acc"] = Fraction(pooled.tp, n_samples)
        values["mis"] = 1 - values["acc"]
        return Aggregate("micro", _to_float(values))

    raise ValueError(f"mode must be 'micro' or 'macro', got {mode!r}")
