import math

import numpy as np
import pytest

from src.decision.voting import FinalPrediction, VotingPolicy
from src.domain.models import RiskLabel
from src.errors import MetricsError
from src.evaluation.metrics import (
    ConfusionCounts,
    accuracy,
    confusion,
    confusion_from_pairs,
    f1,
    metrics_from_counts,
)


def _prediction(sid, label):
    return FinalPrediction(
        subject_id=sid, label=label, per_task_votes={}, at_risk_score=float(label), policy=VotingPolicy.PROB_SUM,
    )


def test_random_counts_match_reference_formulas():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 50, size=4))
        if tp + tn + fp + fn == 0:
            continue
        counts = ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)

        # one correctness flag per subject
        flags = [1] * (tp + tn) + [0] * (fp + fn)
        assert accuracy(counts) == sum(flags) / len(flags)

        if tp == 0:
            if fp + fn == 0:
                assert f1(counts) is None
            else:
                assert f1(counts) == 0.0
            continue
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        assert abs(f1(counts) - 2 * precision * recall / (precision + recall)) < 1e-12


def test_published_dev_row_counts():
    result = metrics_from_counts(ConfusionCounts(tp=36, tn=32, fp=16, fn=16))
    assert result.acc == 0.68
    assert math.isclose(result.f1, 0.6923, abs_tol=5e-5)
    assert result.n == 100


def test_no_positives_leaves_f1_undefined():
    result = metrics_from_counts(ConfusionCounts(tn=5))
    assert result.acc == 1.0
    assert result.f1 is None
    assert not result.f1_defined


def test_accuracy_of_nothing_is_an_error():
    with pytest.raises(MetricsError):
        accuracy(ConfusionCounts())


def test_confusion_counts_outcomes():
    labels = {"A": RiskLabel.AT_RISK, "B": RiskLabel.AT_RISK, "C": RiskLabel.NON_RISK, "D": RiskLabel.NON_RISK}
    predictions = [
        _prediction("A", RiskLabel.AT_RISK),
        _prediction("B", RiskLabel.NON_RISK),
        _prediction("C", RiskLabel.AT_RISK),
        _prediction("D", RiskLabel.NON_RISK),
    ]
    assert confusion(predictions, labels) == ConfusionCounts(tp=1, fn=1, fp=1, tn=1)


def test_confusion_rejects_unknown_and_duplicate_subjects():
    labels = {"A": RiskLabel.AT_RISK}
    with pytest.raises(MetricsError):
        confusion_from_pairs([("Z", RiskLabel.AT_RISK)], labels)
    with pytest.raises(MetricsError):
        confusion_from_pairs([("A", RiskLabel.AT_RISK), ("A", RiskLabel.NON_RISK)], labels)
