"""
Criterion-level and trial-level predictions.

This file contains the following:
1. PairPrediction / TrialPrediction -> one prediction with its truth and groups.
2. predict_pairs -> runs a trained model over every pair of a corpus.
3. oracle_predictions -> the perfect predictor (predicted = label).
4. predict_trial / predict_trials -> eligibility from criterion predictions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from corpus.corpus_models import LABELS, Corpus, Trial
from encoders.encoder_params import EncoderParams
from encoders.precomputed import PrecomputedEmbeddings
from encoders.vocabulary import build_vocabulary
from trainer.training import build_match_batch


class PredictionError(ValueError):
    """Raised when predictions do not cover what is asked of them."""


class VocabularyMismatchError(ValueError):
    """Raised when a checkpoint was trained on another vocabulary."""
    def __init__(self, checkpoint_hash: str, corpus_hash: str):
        self.checkpoint_hash = checkpoint_hash
        self.corpus_hash = corpus_hash
        super().__init__(
            f"checkpoint vocabulary {checkpoint_hash} does not match the "
            f"corpus vocabulary {corpus_hash}"
        )


@dataclass(frozen=True)
class PairPrediction:
    patient_id: str
    criterion_id: str
    criterion_kind: str
    predicted: str
    label: str
    race: str
    gender: str

    @property
    def correct(self) -> bool:
        return self.predicted == self.label

    @staticmethod
    def favours_eligibility(kind: str, outcome: str) -> bool:
        """An inclusion criterion judged met, or an exclusion criterion judged not met."""
        if kind == "inclusion":
            return outcome == "inclusion"
        return outcome != "exclusion"

    @property
    def predicted_positive(self) -> bool:
        return self.favours_eligibility(self.criterion_kind, self.predicted)

    @property
    def truly_positive(self) -> bool:
        return self.favours_eligibility(self.criterion_kind, self.label)

    def group(self, attribute: str) -> str:
        return getattr(self, attribute)


@dataclass(frozen=True)
class TrialPrediction:
    patient_id: str
    trial_id: str
    predicted_eligible: bool
    true_eligible: bool
    race: str
    gender: str

    @property
    def correct(self) -> bool:
        return self.predicted_eligible == self.true_eligible

    @property
    def predicted_positive(self) -> bool:
        return self.predicted_eligible

    @property
    def truly_positive(self) -> bool:
        return self.true_eligible

    def group(self, attribute: str) -> str:
        return getattr(self, attribute)


def check_vocabulary(params: EncoderParams, train_corpus: Corpus) -> None:
    """Raises VocabularyMismatchError unless the train split rebuilds the checkpoint's vocabulary."""
    expected = params.vocabulary.vocabulary_hash()
    found = build_vocabulary(train_corpus).vocabulary_hash()
    if expected != found:
        raise VocabularyMismatchError(expected, found)


def predict_pairs(
        params: EncoderParams,
        corpus: Corpus,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> list[PairPrediction]:
    """
    Predicts a class for every labeled pair of a corpus.

    This function should:
    1. Encode all patients and criteria in one batch.
    2. Take the argmax of the three logits; ties go to the earlier class.
    3. Keep the true label and both group memberships with each prediction.
    """
    if not corpus.pairs:
        return []
    batch = build_match_batch(corpus, corpus.pairs, params, "race", precomputed)
    predicted = np.argmax(batch.logits.data, axis=-1)

    predictions = []
    for pair, index in zip(corpus.pairs, predicted):
        patient = corpus.patient(pair.patient_id)
        predictions.append(PairPrediction(
            patient_id=pair.patient_id,
            criterion_id=pair.criterion_id,
            criterion_kind=corpus.criterion(pair.criterion_id).kind,
            predicted=LABELS[int(index)],
            label=pair.label,
            race=patient.race,
            gender=patient.gender,
        ))
    return predictions


def oracle_predictions(corpus: Corpus) -> list[PairPrediction]:
    """Predictions that repeat the oracle labels."""
    predictions = []
    for pair in corpus.pairs:
        patient = corpus.patient(pair.patient_id)
        predictions.append(PairPrediction(
            pair.patient_id, pair.criterion_id,
            corpus.criterion(pair.criterion_id).kind,
            pair.label, pair.label, patient.race, patient.gender
        ))
    return predictions


def _eligible(trial: Trial, outcomes: dict[str, str]) -> bool:
    included = all(outcomes[c.criterion_id] == "inclusion"
                   for c in trial.inclusion_criteria)
    excluded = any(outcomes[c.criterion_id] == "exclusion"
                   for c in trial.exclusion_criteria)
    return included and not excluded


def predict_trial(predictions: Sequence[PairPrediction],
                  trial: Trial) -> TrialPrediction:
    """
    Decides one patient's eligibility for one trial.

    This function should:
    1. Require a prediction for every criterion of the trial, all for one patient.
    2. Call the patient eligible when every inclusion criterion is predicted
    "inclusion" and no exclusion criterion is predicted "exclusion".
    3. Derive true eligibility the same way from the labels.
    """
    def check_for_errors():
        patients = {p.patient_id for p in predictions}
        if len(patients) != 1:
            raise PredictionError(
                f"trial {trial.trial_id} needs predictions for exactly one "
                f"patient, got {sorted(patients)}"
            )
        missing = [c.criterion_id for c in trial.criteria
                   if c.criterion_id not in predicted]
        if missing:
            raise PredictionError(
                f"no prediction for criteria {missing} of trial {trial.trial_id}"
            )

    predicted = {p.criterion_id: p.predicted for p in predictions}
    check_for_errors()
    truth = {p.criterion_id: p.label for p in predictions}
    first = predictions[0]
    return TrialPrediction(
        patient_id=first.patient_id,
        trial_id=trial.trial_id,
        predicted_eligible=_eligible(trial, predicted),
        true_eligible=_eligible(trial, truth),
        race=first.race,
        gender=first.gender,
    )


def predict_trials(predictions: Sequence[PairPrediction],
                   corpus: Corpus) -> list[TrialPrediction]:
    """Applies predict_trial to every (patient, trial) of the corpus, in corpus order."""
    by_patient: dict[str, dict[str, list[PairPrediction]]] = {}
    for prediction in predictions:
        trial_id = corpus.trial_of(prediction.criterion_id)
        by_patient.setdefault(prediction.patient_id, {}) \
            .setdefault(trial_id, []).append(prediction)

    results = []
    for patient_id in corpus.patient_ids:
        for trial in corpus.trials:
            found = by_patient.get(patient_id, {}).get(trial.trial_id)
            if found is None:
                raise PredictionError(
                    f"no predictions for patient {patient_id} in trial "
                    f"{trial.trial_id}"
                )
            results.append(predict_trial(found, trial))
    return results
