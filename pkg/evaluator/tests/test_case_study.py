"""
Unit tests for evaluator/case_study.py
"""
import pytest
from corpus.corpus_generation import GeneratorConfig, generate
from evaluator.case_study import (
    CASE_STUDY_COLUMNS, PairSetMismatchError, case_study, case_study_table,
    divergences_by_group
)
from evaluator.predictions import PairPrediction, oracle_predictions

# FIXTURES #


@pytest.fixture(scope="module")
def corpus():
    return generate(GeneratorConfig(seed=4, patient_count=12, trial_count=2))


@pytest.fixture
def baseline(corpus):
    return oracle_predictions(corpus)


def flipped(prediction: PairPrediction) -> PairPrediction:
    other = "exclusion" if prediction.predicted != "exclusion" else "inclusion"
    return PairPrediction(prediction.patient_id, prediction.criterion_id,
                          prediction.criterion_kind, other, prediction.label,
                          prediction.race, prediction.gender)


# TESTS #


def test_identical_predictions_give_no_rows(corpus, baseline):
    assert case_study(baseline, list(baseline), corpus) == []


def test_planted_disagreement_is_found(corpus, baseline):
    """
    Test a single planted disagreement.

    This function tests the following:
    1. Exactly that pair is returned.
    2. The row carries the criterion text, groups and both verdicts.
    """
    fairpm = list(baseline)
    fairpm[5] = flipped(baseline[5])
    rows = case_study(baseline, fairpm, corpus)

    assert len(rows) == 1  # Test 1.
    row = rows[0]
    assert (row.patient_id, row.criterion_id) == \
        (baseline[5].patient_id, baseline[5].criterion_id)

    assert row.criterion_text == corpus.criterion(row.criterion_id).text  # Test 2.
    assert row.trial_id == corpus.trial_of(row.criterion_id)
    assert row.race == baseline[5].race
    assert (row.baseline, row.fairpm) == (baseline[5].predicted,
                                          fairpm[5].predicted)


def test_rows_sorted_by_criterion(corpus, baseline):
    fairpm = [flipped(p) for p in baseline]
    rows = case_study(baseline, fairpm, corpus)

    keys = [(row.criterion_id, row.patient_id) for row in rows]
    assert keys == sorted(keys)
    assert len(rows) == len(baseline)


def test_mismatched_pair_sets_rejected(corpus, baseline):
    with pytest.raises(PairSetMismatchError):
        case_study(baseline, baseline[1:], corpus)


def test_table_and_grouping(corpus, baseline):
    fairpm = [flipped(p) for p in baseline[:6]] + baseline[6:]
    rows = case_study(baseline, fairpm, corpus)

    table = case_study_table(rows)
    assert list(table.columns) == list(CASE_STUDY_COLUMNS)
    assert len(table) == 6

    grouped = divergences_by_group(rows, "gender")
    assert sum(len(group) for group in grouped.values()) == 6
    assert all(row.gender == group
               for group, members in grouped.items() for row in members)
