"""
Three-task logit voting.

majority_argmax: each task votes with the argmax of its logits (an exact tie
votes AT_RISK) and the majority of the three votes wins. prob_sum: softmax
probabilities are summed across tasks and the larger sum wins (a tie goes to
AT_RISK). With fewer than three tasks majority_argmax degrades to prob_sum.
"""
import csv
import io
import math
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.domain.models import ALL_TASKS, Logits, RiskLabel, TaskKind
from src.errors import VotingError

logger = structlog.get_logger()


class VotingPolicy(str, Enum):
    MAJORITY_ARGMAX = "majority_argmax"
    PROB_SUM = "prob_sum"


class TaskLogitsSet(BaseModel):
    """All per-task logits of one subject."""
    model_config = ConfigDict(frozen=True)

    subject_id: str
    logits: Dict[TaskKind, Logits]

    @model_validator(mode="after")
    def _consistent(self):
        if not self.logits:
            raise ValueError(f"no task logits for subject {self.subject_id}")
        for task, lg in self.logits.items():
            if lg.task != task or lg.subject_id != self.subject_id:
                raise ValueError(
                    f"logits for {lg.subject_id}/{lg.task.value} filed under "
                    f"{self.subject_id}/{task.value}"
                )
        return self

    @classmethod
    def from_logits(cls, subject_id: str, logits: Iterable[Logits]) -> "TaskLogitsSet":
        mapping: Dict[TaskKind, Logits] = {}
        for lg in logits:
            if lg.task in mapping:
                raise VotingError(f"two logits for {subject_id}/{lg.task.value}")
            mapping[lg.task] = lg
        if not mapping:
            raise VotingError(f"no task logits for subject {subject_id}")
        return cls(subject_id=subject_id, logits=mapping)


class FinalPrediction(BaseModel):
    """Voted label of one subject."""
    model_config = ConfigDict(frozen=True)

    subject_id: str
    label: RiskLabel
    per_task_votes: Dict[TaskKind, RiskLabel]
    at_risk_score: float = Field(ge=0.0, le=1.0)
    policy: VotingPolicy


def softmax(values: Sequence[float]) -> Tuple[float, float]:
    """
    Two-class softmax, shift invariant.

    Raises:
        VotingError: Non-finite input
    """
    x0, x1 = float(values[0]), float(values[1])
    if not (math.isfinite(x0) and math.isfinite(x1)):
        raise VotingError(f"non-finite logits {values}")
    m = max(x0, x1)
    e0, e1 = math.exp(x0 - m), math.exp(x1 - m)
    total = e0 + e1
    return (e0 / total, e1 / total)


def task_vote(values: Sequence[float], tie_label: RiskLabel = RiskLabel.AT_RISK) -> RiskLabel:
    """Argmax vote of one task; an exact tie returns tie_label."""
    if values[1] > values[0]:
        return RiskLabel.AT_RISK
    if values[0] > values[1]:
        return RiskLabel.NON_RISK
    return tie_label


def aggregate(
    subject_logits: TaskLogitsSet,
    policy: VotingPolicy = VotingPolicy.MAJORITY_ARGMAX,
    tie_label: RiskLabel = RiskLabel.AT_RISK,
) -> FinalPrediction:
    """
    Combine one subject's per-task logits into a final label.

    Args:
        subject_logits: Up to three task logits
        policy: Voting policy
        tie_label: Label for within-task and cross-task ties

    Returns:
        FinalPrediction recording votes, score and the policy actually applied
    """
    if not subject_logits.logits:
        raise VotingError(f"no task logits for subject {subject_logits.subject_id}")

    tasks = [t for t in ALL_TASKS if t in subject_logits.logits]
    values = {t: subject_logits.logits[t].values for t in tasks}
    probs = {t: softmax(values[t]) for t in tasks}
    votes = {t: task_vote(values[t], tie_label) for t in tasks}
    at_risk_score = sum(p[1] for p in probs.values()) / len(tasks)

    applied = policy
    if policy == VotingPolicy.MAJORITY_ARGMAX and len(tasks) == len(ALL_TASKS):
        at_risk_votes = sum(1 for v in votes.values() if v == RiskLabel.AT_RISK)
        # three binary votes never tie
        label = RiskLabel.AT_RISK if at_risk_votes * 2 > len(tasks) else RiskLabel.NON_RISK
    else:
        # majority needs all three tasks
        applied = VotingPolicy.PROB_SUM
        non_risk_sum = sum(p[0] for p in probs.values())
        at_risk_sum = sum(p[1] for p in probs.values())
        if at_risk_sum > non_risk_sum:
            label = RiskLabel.AT_RISK
        elif non_risk_sum > at_risk_sum:
            label = RiskLabel.NON_RISK
        else:
            label = tie_label

    return FinalPrediction(
        subject_id=subject_logits.subject_id,
        label=label,
        per_task_votes=votes,
        at_risk_score=min(1.0, max(0.0, at_risk_score)),
        policy=applied,
    )


def aggregate_dataset(
    subjects: Sequence[TaskLogitsSet],
    policy: VotingPolicy = VotingPolicy.MAJORITY_ARGMAX,
    tie_label: RiskLabel = RiskLabel.AT_RISK,
) -> List[FinalPrediction]:
    """
    Aggregate every subject, preserving input order.

    Raises:
        VotingError: Duplicate subject
    """
    seen = set()
    predictions = []
    for s in subjects:
        if s.subject_id in seen:
            raise VotingError(f"duplicate subject {s.subject_id}")
        seen.add(s.subject_id)
        predictions.append(aggregate(s, policy, tie_label))

    degraded = sum(1 for s in subjects if len(s.logits) < len(ALL_TASKS))
    logger.info(
        "predictions_aggregated",
        subjects=len(predictions),
        policy=policy.value,
        degraded_to_prob_sum=degraded if policy == VotingPolicy.MAJORITY_ARGMAX else 0,
    )
    return predictions


PREDICTION_COLUMNS = ["subject_id", "label", "at_risk_score", "policy"] + [
    f"vote_{t.value}" for t in ALL_TASKS
]


def format_predictions(predictions: Sequence[FinalPrediction]) -> str:
    """Predictions CSV: header, then one row per subject; missing votes are empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PREDICTION_COLUMNS)
    for p in predictions:
        votes = [
            str(int(p.per_task_votes[t])) if t in p.per_task_votes else ""
            for t in ALL_TASKS
        ]
        writer.writerow(
            [p.subject_id, int(p.label), f"{p.at_risk_score:.6f}", p.policy.value] + votes
        )
    return buf.getvalue()


def write_predictions(predictions: Sequence[FinalPrediction], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_predictions(predictions), encoding="utf-8")
    return path


def read_predictions(path: Union[str, Path]) -> List[FinalPrediction]:
    """Parse a predictions CSV written by write_predictions."""
    predictions = []
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            votes = {
                t: RiskLabel(int(row[f"vote_{t.value}"]))
                for t in ALL_TASKS
                if row.get(f"vote_{t.value}")
            }
            predictions.append(FinalPrediction(
                subject_id=row["subject_id"],
                label=RiskLabel(int(row["label"])),
                per_task_votes=votes,
                at_risk_score=float(row["at_risk_score"]),
                policy=VotingPolicy(row["policy"]),
            ))
    return predictions
