"""
Confusion counts, accuracy and F1 with AT_RISK as the positive class.
"""
from typing import Mapping, Optional, Sequence

from pydantic import BaseModel, ConfigDict, NonNegativeInt

from src.decision.voting import FinalPrediction
from src.domain.models import RiskLabel
from src.errors import MetricsError


class ConfusionCounts(BaseModel):
    model_config = ConfigDict(frozen=True)

    tp: NonNegativeInt = 0
    tn: NonNegativeInt = 0
    fp: NonNegativeInt = 0
    fn: NonNegativeInt = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


class MetricsResult(BaseModel):
    """Accuracy and F1; f1 is None when undefined (no positives anywhere)."""
    model_config = ConfigDict(frozen=True)

    acc: float
    f1: Optional[float]
    n: int
    counts: ConfusionCounts

    @property
    def f1_defined(self) -> bool:
        return self.f1 is not None


def confusion(
    predictions: Sequence[FinalPrediction],
    labels: Mapping[str, RiskLabel],
) -> ConfusionCounts:
    """
    Count outcomes of final predictions against gold labels.

    Raises:
        MetricsError: Missing label or duplicate prediction
    """
    return confusion_from_pairs(
        [(p.subject_id, p.label) for p in predictions],
        labels,
    )


def confusion_from_pairs(
    predicted: Sequence[tuple],
    labels: Mapping[str, RiskLabel],
) -> ConfusionCounts:
    """Same as confusion() over (subject_id, predicted label) pairs."""
    tp = tn = fp = fn = 0
    seen = set()
    for subject_id, label in predicted:
        if subject_id in seen:
            raise MetricsError(f"duplicate prediction for {subject_id}")
        seen.add(subject_id)
        if subject_id not in labels:
            raise MetricsError(f"no gold label for {subject_id}")

        gold = RiskLabel(labels[subject_id])
        pred = RiskLabel(label)
        if pred == RiskLabel.AT_RISK:
            if gold == RiskLabel.AT_RISK:
                tp += 1
            else:
                fp += 1
        else:
            if gold == RiskLabel.NON_RISK:
                tn += 1
            else:
                fn += 1

    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def accuracy(counts: ConfusionCounts) -> float:
    """
    Acc = (TP + TN) / (TP + TN + FP + FN).

    Raises:
        MetricsError: Zero total
    """
    if counts.total == 0:
        raise MetricsError("accuracy is undefined for zero evaluated subjects")
    return (counts.tp + counts.tn) / counts.total


def f1(counts: ConfusionCounts) -> Optional[float]:
    """F1 = 2TP / (2TP + FP + FN); None when the denominator is zero."""
    denominator = 2 * counts.tp + counts.fp + counts.fn
    if denominator == 0:
        return None
    return 2 * counts.tp / denominator


def metrics_from_counts(counts: ConfusionCounts) -> MetricsResult:
    return MetricsResult(acc=accuracy(counts), f1=f1(counts), n=counts.total, counts=counts)
