"""Dataset splitting, classification metrics and table rendering.

Metrics are computed from a 7x7 confusion matrix (rows = true class, columns =
predicted class). Classes without support get zero metrics and a flag instead
of NaN. Overall accuracy is reported both micro-averaged (trace / total) and
macro-averaged (mean per-class recall).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, TypeVar

import numpy as np

from .registry import EmotionClass

N_CLASSES = len(EmotionClass)
T = TypeVar("T")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (N_CLASSES, N_CLASSES):
            raise EvaluationError(f"confusion matrix must be {N_CLASSES}x{N_CLASSES}")
        if (c < 0).any():
            raise EvaluationError("counts must be non-negative")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_pairs(cls, predictions, labels) -> "ConfusionMatrix":
        c = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        np.add.at(c, (np.asarray(labels, dtype=int), np.asarray(predictions, dtype=int)), 1)
        return cls(c)

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def zero_support(self) -> np.ndarray:
        return self.support == 0

    @property
    def rates(self) -> np.ndarray:
        """Row-normalized counts; rows without support stay all-zero."""
        s = self.support[:, None].astype(float)
        return np.divide(self.counts, s, out=np.zeros(self.counts.shape), where=s > 0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def f_measure(precision: float, recall: float) -> float:
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


@dataclass(frozen=True)
class ClassMetrics:
    emotion: EmotionClass
    precision: float
    recall: float
    f_measure: float
    support: int
    predicted: int

    @property
    def zero_support(self) -> bool:
        return self.support == 0


@dataclass(frozen=True)
class Metrics:
    confusion: ConfusionMatrix
    per_class: tuple[ClassMetrics, ...]
    accuracy: float  # micro: trace / total
    macro_recall: float
    macro_precision: float
    macro_f: float
    micro_recall: float

    def of(self, emotion: EmotionClass) -> ClassMetrics:
        return self.per_class[int(emotion)]


def class_metrics(cm: ConfusionMatrix) -> tuple[ClassMetrics, ...]:
    c = cm.counts
    out = []
    for e in EmotionClass:
        i = int(e)
        tp = int(c[i, i])
        pred = int(c[:, i].sum())
        sup = int(c[i, :].sum())
        p = tp / pred if pred else 0.0
        r = tp / sup if sup else 0.0
        out.append(ClassMetrics(e, p, r, f_measure(p, r), sup, pred))
    return tuple(out)


def metrics(predictions: Sequence, labels: Sequence) -> Metrics:
    if len(predictions) != len(labels):
        raise EvaluationError("predictions and labels differ in length")
    if len(labels) == 0:
        raise EvaluationError("no items to evaluate")
    return metrics_from_confusion(ConfusionMatrix.from_pairs(predictions, labels))


def metrics_from_confusion(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise EvaluationError("no items to evaluate")
    per = class_metrics(cm)
    tp = int(np.trace(cm.counts))
    total = cm.total
    # micro recall pools TP and FN over classes; FN sum is total - tp
    micro_recall = tp / (tp + (total - tp))
    supported = [m for m in per if not m.zero_support]
    return Metrics(
        confusion=cm, per_class=per, accuracy=tp / total,
        macro_recall=float(np.mean([m.recall for m in supported])),
        macro_precision=float(np.mean([m.precision for m in supported])),
        macro_f=float(np.mean([m.f_measure for m in supported])),
        micro_recall=micro_recall,
    )


def split_dataset(items: Sequence[T], fraction: float, seed: int,
                  label: Callable[[T], int] = lambda s: s.label) -> tuple[list[T], list[T]]:
    """Stratified seeded split into (train, test); each keeps the input order.

    Every class gets round(n * (1 - fraction)) test items, at least one and at
    most n - 1.
    """
    if not 0.0 < fraction < 1.0:
        raise EvaluationError("fraction must lie in (0, 1)")
    by_class: dict[int, list[int]] = {}
    for i, item in enumerate(items):
        by_class.setdefault(int(label(item)), []).append(i)
    small = sorted(c for c, idx in by_class.items() if len(idx) < 2)
    if small:
        raise EvaluationError(f"classes with fewer than 2 items: {small}")
    rng = np.random.default_rng(seed)
    test_idx: set[int] = set()
    for c in sorted(by_class):
        idx = by_class[c]
        n_test = min(max(1, math.floor(len(idx) * (1.0 - fraction) + 0.5)), len(idx) - 1)
        test_idx.update(idx[j] for j in rng.permutation(len(idx))[:n_test])
    train = [it for i, it in enumerate(items) if i not in test_idx]
    test = [it for i, it in enumerate(items) if i in test_idx]
    return train, test


# -- rendering --------------------------------------------------------------------

def _f(x: float) -> str:
    return f"{x:.4f}"


def _config_lines(config: Mapping | None, prefix: str) -> list[str]:
    if not config:
        return []
    return [f"{prefix}config {json.dumps(config, sort_keys=True, separators=(',', ':'))}"]


def _text_block(name: str, m: Metrics) -> list[str]:
    lines = [f"== {name} ==", "",
             f"{'class':<4} {'emotion':<9} {'precision':>9} {'recall':>9} {'f_measure':>9} {'support':>7}"]
    for cm in m.per_class:
        flag = "  (no support)" if cm.zero_support else ""
        lines.append(f"{int(cm.emotion):<4} {cm.emotion.label:<9} {_f(cm.precision):>9} {_f(cm.recall):>9} "
                     f"{_f(cm.f_measure):>9} {cm.support:>7}{flag}")
    lines += ["", f"overall accuracy (micro) {_f(m.accuracy)}",
              f"overall accuracy (macro recall) {_f(m.macro_recall)}",
              f"macro precision {_f(m.macro_precision)}  macro f_measure {_f(m.macro_f)}", "",
              "confusion matrix (rows true, columns predicted; counts | row rates)"]
    names = [e.label[:7] for e in EmotionClass]
    lines.append(f"{'':<9}" + "".join(f"{n:>8}" for n in names) + " |" + "".join(f"{n:>8}" for n in names))
    rates = m.confusion.rates
    for e in EmotionClass:
        i = int(e)
        lines.append(f"{e.label:<9}" + "".join(f"{int(v):>8}" for v in m.confusion.counts[i]) + " |"
                     + "".join(f"{v:>8.3f}" for v in rates[i]))
    return lines


def report(results: Mapping[str, Metrics], format: str = "text", config: Mapping | None = None) -> str:
    """Render per-class metrics and confusion matrices of one or more runs."""
    if format == "text":
        lines = _config_lines(config, "# ")
        for name in sorted(results):
            if lines:
                lines.append("")
            lines += _text_block(name, results[name])
        return "\n".join(lines) + "\n"
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for line in _config_lines(config, "# "):
            buf.write(line + "\n")
        w.writerow(["run", "section", "class", "emotion", "c0", "c1", "c2", "c3", "c4", "c5", "c6"])
        for name in sorted(results):
            m = results[name]
            for cm in m.per_class:
                w.writerow([name, "metrics", int(cm.emotion), cm.emotion.label, repr(cm.precision),
                            repr(cm.recall), repr(cm.f_measure), cm.support, int(cm.zero_support), "", ""])
            for e in EmotionClass:
                w.writerow([name, "confusion", int(e), e.label] + [int(v) for v in m.confusion.counts[int(e)]])
            w.writerow([name, "overall", "", "", repr(m.accuracy), repr(m.macro_recall), "", "", "", "", ""])
        return buf.getvalue()
    raise EvaluationError(f"unknown report format {format!r}")


def confusion_from_csv(text: str) -> dict[str, ConfusionMatrix]:
    """Confusion matrices of a CSV report, keyed by run name."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    out: dict[str, np.ndarray] = {}
    for r in rows[1:]:
        if r[1] == "confusion":
            out.setdefault(r[0], np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64))[int(r[2])] = \
                [int(v) for v in r[4:11]]
    return {k: ConfusionMatrix(v) for k, v in out.items()}
