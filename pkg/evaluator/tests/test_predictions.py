"""
Unit tests for evaluator/predictions.py
"""
import itertools

import pytest
from corpus.corpus_generation import GeneratorConfig, generate, split
from corpus.corpus_models import Criterion, CriterionPredicate, Trial
from encoders.encoder_params import EncoderDims, init_encoder_params
from encoders.vocabulary import build_vocabulary
from evaluator.predictions import (
    PairPrediction, PredictionError, VocabularyMismatchError, check_vocabulary,
    oracle_predictions, predict_pairs, predict_trial, predict_trials
)

# FIXTURES #


def make_trial(inclusion_count: int, exclusion_count: int) -> Trial:
    predicate = CriterionPredicate("age", operator=">=", threshold=18)
    inclusion = tuple(Criterion(f"T00-I{i}", "inclusion", "age ≥ 18 years",
                                predicate) for i in range(inclusion_count))
    exclusion = tuple(Criterion(f"T00-E{i}", "exclusion", "age ≥ 90 years",
                                predicate) for i in range(exclusion_count))
    return Trial("T00", inclusion, exclusion)


def predictions_for(trial: Trial, predicted, labels=None):
    labels = labels or predicted
    return [
        PairPrediction("P0000", criterion.criterion_id, criterion.kind,
                       guess, label, "white", "male")
        for criterion, guess, label in zip(trial.criteria, predicted, labels)
    ]


def conjunction_oracle(trial: Trial, classes) -> bool:
    """Counts the failing criteria instead of testing them in turn."""
    failures = 0
    for criterion, outcome in zip(trial.criteria, classes):
        if criterion.kind == "inclusion" and outcome != "inclusion":
            failures += 1
        if criterion.kind == "exclusion" and outcome == "exclusion":
            failures += 1
    return failures == 0


@pytest.fixture(scope="module")
def toy_splits():
    corpus = generate(GeneratorConfig(seed=2, patient_count=30, trial_count=2))
    return split(corpus, (0.624, 0.072, 0.304), seed=2)


# TESTS FOR PREDICT_TRIAL #


def test_eligible_when_inclusions_met_and_exclusions_unknown():
    trial = make_trial(2, 1)
    result = predict_trial(
        predictions_for(trial, ["inclusion", "inclusion", "unknown"]), trial
    )
    assert result.predicted_eligible
    assert result.true_eligible


def test_predicted_exclusion_disqualifies():
    trial = make_trial(1, 2)
    result = predict_trial(
        predictions_for(trial, ["inclusion", "unknown", "exclusion"],
                        ["inclusion", "unknown", "unknown"]), trial
    )
    assert not result.predicted_eligible
    assert result.true_eligible
    assert not result.correct


@pytest.mark.parametrize("inclusion_count,exclusion_count", [
    (1, 0), (1, 1), (2, 0), (1, 2), (2, 1), (3, 0)
])
def test_trial_matches_conjunction_over_every_assignment(inclusion_count,
                                                         exclusion_count):
    """Test every 3^k class assignment of trials with k <= 3 criteria."""
    trial = make_trial(inclusion_count, exclusion_count)
    classes = ("inclusion", "exclusion", "unknown")

    for assignment in itertools.product(classes, repeat=len(trial.criteria)):
        result = predict_trial(predictions_for(trial, list(assignment)), trial)
        assert result.predicted_eligible == \
            conjunction_oracle(trial, assignment), assignment


def test_missing_criterion_rejected():
    trial = make_trial(2, 1)
    partial = predictions_for(trial, ["inclusion", "inclusion", "unknown"])[:2]

    with pytest.raises(PredictionError):
        predict_trial(partial, trial)


# TESTS FOR MODEL PREDICTIONS #


def test_predict_pairs_follow_the_logits(toy_splits):
    """
    Test inference over a corpus.

    This function tests the following:
    1. There is one prediction per labeled pair, in pair order.
    2. Each prediction carries the pair's label, kind and groups.
    3. Repeated inference gives the same predictions.
    """
    corpus = toy_splits["test"]
    params = init_encoder_params(build_vocabulary(toy_splits["train"]),
                                 EncoderDims(6, 4, 2), seed=1)

    predictions = predict_pairs(params, corpus)
    assert [(p.patient_id, p.criterion_id) for p in predictions] == \
        [(p.patient_id, p.criterion_id) for p in corpus.pairs]  # Test 1.

    for prediction, pair in zip(predictions, corpus.pairs):
        patient = corpus.patient(pair.patient_id)
        assert prediction.label == pair.label  # Test 2.
        assert prediction.criterion_kind == corpus.criterion(pair.criterion_id).kind
        assert (prediction.race, prediction.gender) == (patient.race, patient.gender)

    assert predict_pairs(params, corpus) == predictions  # Test 3.


def test_oracle_predictions_are_correct(toy_splits):
    corpus = toy_splits["train"]
    predictions = oracle_predictions(corpus)

    assert len(predictions) == len(corpus.pairs)
    assert all(p.correct for p in predictions)

    trials = predict_trials(predictions, corpus)
    assert len(trials) == len(corpus.patients) * len(corpus.trials)
    assert all(t.predicted_eligible == t.true_eligible for t in trials)


def test_predict_trials_needs_every_pair(toy_splits):
    corpus = toy_splits["valid"]
    predictions = oracle_predictions(corpus)[1:]

    with pytest.raises(PredictionError):
        predict_trials(predictions, corpus)


def test_vocabulary_mismatch_names_both_hashes(toy_splits):
    params = init_encoder_params(build_vocabulary(toy_splits["test"]),
                                 EncoderDims(4, 3, 2))
    other = generate(GeneratorConfig(seed=99, patient_count=5, trial_count=1))
    check_vocabulary(params, toy_splits["test"])

    with pytest.raises(VocabularyMismatchError) as caught:
        check_vocabulary(params, other)
    assert caught.value.checkpoint_hash in str(caught.value)
    assert caught.value.corpus_hash in str(caught.value)
    assert caught.value.checkpoint_hash != caught.value.corpus_hash
