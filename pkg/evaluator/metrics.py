"""
Accuracy, F1 and group fairness metrics.

This file contains the following:
1. compute_dp -> gap between the groups' positive-outcome rates.
2. compute_eo -> gap between the groups' true-positive rates.
3. compute_accuracy_f1 -> accuracy with macro (criterion) or binary (trial) F1.
4. evaluate -> all four metrics as a MetricsReport.
5. reports_table / reports_from_table -> the fixed-column report table.

A prediction is "positive" when it favours eligibility: for trials, predicted
eligible; for criteria, an inclusion criterion predicted "inclusion" or an
exclusion criterion predicted anything but "exclusion". The same rule applied
to the true label marks the truly positive instances.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import accuracy_score, f1_score

from corpus.corpus_models import SENSITIVE_ATTRIBUTES

TASKS = ("criterion", "trial")
REPORT_COLUMNS = ("lambda", "task", "attribute", "accuracy", "f1", "dp", "eo")


class MetricInputError(ValueError):
    """Raised when a metric is undefined for the given predictions."""
    def __init__(self, detail: str, group: str = None):
        self.group = group
        super().__init__(detail)


def prediction_frame(predictions: Sequence, attribute: str) -> pd.DataFrame:
    """One row per prediction: group, predicted_positive, truly_positive, correct."""
    if attribute not in SENSITIVE_ATTRIBUTES:
        raise MetricInputError(f"Unknown sensitive attribute: {attribute}")
    return pd.DataFrame({
        "group": [p.group(attribute) for p in predictions],
        "predicted_positive": [bool(p.predicted_positive) for p in predictions],
        "truly_positive": [bool(p.truly_positive) for p in predictions],
        "correct": [bool(p.correct) for p in predictions],
    })


def _group_rates(frame: pd.DataFrame, attribute: str, column: str,
                 what: str) -> list[float]:
    """Mean of `column` per group of the attribute, in attribute order."""
    rates = []
    for group in SENSITIVE_ATTRIBUTES[attribute]:
        members = frame.loc[frame["group"] == group, column]
        if members.empty:
            raise MetricInputError(
                f"group '{group}' of {attribute} has no {what}", group
            )
        rates.append(float(members.sum()) / len(members))
    return rates


def compute_dp(predictions: Sequence, attribute: str) -> float:
    """|P(positive | group 1) - P(positive | group 2)|; each group must be present."""
    frame = prediction_frame(predictions, attribute)
    first, second = _group_rates(frame, attribute, "predicted_positive",
                                 "predictions")
    return abs(first - second)


def compute_eo(predictions: Sequence, attribute: str) -> float:
    """|TPR(group 1) - TPR(group 2)|; each group needs a truly positive instance."""
    frame = prediction_frame(predictions, attribute)
    positives = frame[frame["truly_positive"]]
    first, second = _group_rates(positives, attribute, "predicted_positive",
                                 "truly positive instances")
    return abs(first - second)


def compute_accuracy_f1(predictions: Sequence, task: str) -> tuple[float, float]:
    """
    Returns (accuracy, f1).

    This function should:
    1. Reject an empty prediction set or an unknown task.
    2. Score exact matches for accuracy.
    3. For criteria, macro-average F1 over the classes that occur in the
    labels or the predictions.
    4. For trials, compute binary F1 with eligible as the positive class.
    A class with no positives and no errors scores 1.0.
    """
    if task not in TASKS:
        raise MetricInputError(f"Unknown task: {task}")
    if not predictions:
        raise MetricInputError("no predictions to score")

    if task == "trial":
        y_true = np.array([p.true_eligible for p in predictions], dtype=int)
        y_pred = np.array([p.predicted_eligible for p in predictions], dtype=int)
        return (float(accuracy_score(y_true, y_pred)),
                float(f1_score(y_true, y_pred, average="binary", pos_label=1,
                               zero_division=1.0)))

    y_true = [p.label for p in predictions]
    y_pred = [p.predicted for p in predictions]
    return (float(accuracy_score(y_true, y_pred)),
            float(f1_score(y_true, y_pred, average="macro",
                           zero_division=1.0)))


@dataclass
class MetricsReport:
    task: str
    attribute: str
    accuracy: float
    f1: float
    dp: float
    eo: float
    group_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "attribute": self.attribute,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "dp": self.dp,
            "eo": self.eo,
            "group-counts": dict(self.group_counts),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            task=data["task"],
            attribute=data["attribute"],
            accuracy=float(data["accuracy"]),
            f1=float(data["f1"]),
            dp=float(data["dp"]),
            eo=float(data["eo"]),
            group_counts={k: int(v) for k, v in
                          data.get("group-counts", {}).items()},
        )


def evaluate(predictions: Sequence, task: str, attribute: str) -> MetricsReport:
    """Accuracy, F1, DP and EO of one prediction set, with per-group counts."""
    accuracy, f1 = compute_accuracy_f1(predictions, task)
    counts = prediction_frame(predictions, attribute)["group"].value_counts()
    return MetricsReport(
        task=task,
        attribute=attribute,
        accuracy=accuracy,
        f1=f1,
        dp=compute_dp(predictions, attribute),
        eo=compute_eo(predictions, attribute),
        group_counts={group: int(counts.get(group, 0))
                      for group in SENSITIVE_ATTRIBUTES[attribute]},
    )


def report_row(lambda_fc: float, report: MetricsReport) -> dict:
    return {
        "lambda": float(lambda_fc),
        "task": report.task,
        "attribute": report.attribute,
        "accuracy": report.accuracy,
        "f1": report.f1,
        "dp": report.dp,
        "eo": report.eo,
    }


def reports_table(rows: Sequence[tuple[float, MetricsReport]]) -> pd.DataFrame:
    """One row per (lambda, report) in REPORT_COLUMNS order."""
    return pd.DataFrame([report_row(lambda_fc, report)
                         for lambda_fc, report in rows],
                        columns=list(REPORT_COLUMNS))


def reports_from_table(table: pd.DataFrame) -> list[tuple[float, MetricsReport]]:
    """Parses a report table back into (lambda, MetricsReport) pairs."""
    missing = [c for c in REPORT_COLUMNS if c not in table.columns]
    if missing:
        raise MetricInputError(f"report table lacks columns {missing}")
    return [
        (float(row["lambda"]), MetricsReport(
            task=row["task"],
            attribute=row["attribute"],
            accuracy=float(row["accuracy"]),
            f1=float(row["f1"]),
            dp=float(row["dp"]),
            eo=float(row["eo"]),
        ))
        for _, row in table.iterrows()
    ]
