"""Support-weighted accuracy and F1."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ClassStats:
    support: int
    predicted: int
    correct: int

    @property
    def recall(self):
        return self.correct / self.support if self.support else 0.0

    @property
    def precision(self):
        return self.correct / self.predicted if self.predicted else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


def per_class(predictions, gold, classes=None):
    predictions = np.asarray(predictions)
    gold = np.asarray(gold)
    if predictions.shape != gold.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {gold.shape}")
    if gold.size == 0:
        raise ValueError("metrics need at least one sample")
    classes = sorted(set(gold.tolist())) if classes is None else sorted(classes)
    outside = set(gold.tolist()) - set(classes)
    if outside:
        raise ValueError(f"gold labels outside the class set: {sorted(outside)}")
    return {
        c: ClassStats(
            int((gold == c).sum()),
            int((predictions == c).sum()),
            int(((gold == c) & (predictions == c)).sum()),
        )
        for c in classes
    }


def _weighted(stats, attr):
    total = sum(s.support for s in stats.values())
    return sum(getattr(s, attr) * s.support / total for s in stats.values())


def _weighted_recall(stats):
    # recall_c * support_c is exactly correct_c, so summing the integers
    # gives the support-weighted mean without per-class rounding
    return sum(s.correct for s in stats.values()) / sum(s.support for s in stats.values())


def weighted_accuracy(predictions, gold, classes=None):
    """Per-class recall averaged with support weights (equals correct / total)."""
    return _weighted_recall(per_class(predictions, gold, classes))


def weighted_f1(predictions, gold, classes=None):
    """Per-class F1 averaged with support weights; undefined F1 counts as 0."""
    return _weighted(per_class(predictions, gold, classes), "f1")


@dataclass
class PartitionMetrics:
    accuracy: float
    f1: float
    support: int
    class_support: dict = field(default_factory=dict)
    class_recall: dict = field(default_factory=dict)


def partition_metrics(predictions, gold, classes=None, names=None):
    stats = per_class(predictions, gold, classes)
    stats = {c: s for c, s in stats.items() if s.support > 0}
    name = (lambda c: names[c]) if names else str
    return PartitionMetrics(
        accuracy=_weighted_recall(stats),
        f1=_weighted(stats, "f1"),
        support=sum(s.support for s in stats.values()),
        class_support={name(c): s.support for c, s in stats.items()},
        class_recall={name(c): s.recall for c, s in stats.items()},
    )
