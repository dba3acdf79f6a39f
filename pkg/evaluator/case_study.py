"""
Pairs on which two models disagree.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import pandas as pd

from corpus.corpus_models import Corpus
from evaluator.predictions import PairPrediction

CASE_STUDY_COLUMNS = (
    "trial_id", "criterion_id", "criterion_text", "patient_id", "race",
    "gender", "label", "baseline", "fairpm"
)


class PairSetMismatchError(ValueError):
    """Raised when two prediction sets do not cover the same pairs."""


@dataclass(frozen=True)
class CaseStudyRow:
    trial_id: str
    criterion_id: str
    criterion_text: str
    patient_id: str
    race: str
    gender: str
    label: str
    baseline: str
    fairpm: str


def case_study(
        baseline: Sequence[PairPrediction],
        fairpm: Sequence[PairPrediction],
        corpus: Corpus
) -> list[CaseStudyRow]:
    """
    Lists the pairs where the two models predict different classes.

    This function should:
    1. Reject prediction sets that do not cover the same pairs.
    2. Keep each divergent pair with its criterion text, groups and both verdicts.
    3. Sort by criterion id, then patient id.
    """
    def key(prediction: PairPrediction) -> tuple[str, str]:
        return prediction.patient_id, prediction.criterion_id

    baseline_by_pair = {key(p): p for p in baseline}
    fairpm_by_pair = {key(p): p for p in fairpm}
    if len(baseline_by_pair) != len(baseline) or \
            len(fairpm_by_pair) != len(fairpm) or \
            set(baseline_by_pair) != set(fairpm_by_pair):
        only_one = set(baseline_by_pair) ^ set(fairpm_by_pair)
        raise PairSetMismatchError(
            f"prediction sets differ on {len(only_one)} pairs or repeat a pair"
        )

    rows = []
    for pair_key in sorted(baseline_by_pair, key=lambda k: (k[1], k[0])):
        first, second = baseline_by_pair[pair_key], fairpm_by_pair[pair_key]
        if first.predicted == second.predicted:
            continue
        rows.append(CaseStudyRow(
            trial_id=corpus.trial_of(first.criterion_id),
            criterion_id=first.criterion_id,
            criterion_text=corpus.criterion(first.criterion_id).text,
            patient_id=first.patient_id,
            race=first.race,
            gender=first.gender,
            label=first.label,
            baseline=first.predicted,
            fairpm=second.predicted,
        ))
    return rows


def case_study_table(rows: Sequence[CaseStudyRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in rows],
                        columns=list(CASE_STUDY_COLUMNS))


def divergences_by_group(rows: Sequence[CaseStudyRow],
                         attribute: str) -> dict[str, list[CaseStudyRow]]:
    """Divergent rows grouped by the patient's value of a sensitive attribute."""
    grouped: dict[str, list[CaseStudyRow]] = {}
    for row in rows:
        grouped.setdefault(getattr(row, attribute), []).append(row)
    return dict(sorted(grouped.items()))
