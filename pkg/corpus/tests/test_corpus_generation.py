"""
Unit tests for corpus/corpus_generation.py
"""
import math

import pytest
from corpus.corpus_models import (
    Criterion, CriterionPredicate, MedicalCode, PatientRecord
)
from corpus.corpus_generation import (
    CorpusConfigError, GeneratorConfig, generate, oracle_label, split
)
from corpus.corpus_io import dumps_corpus, inclusion_rate_gap, label_rates

# FIXTURES FOR PATIENTS AND CRITERIA #


@pytest.fixture
def adult_patient():
    """A 20-year-old with diagnosis and procedure codes but no medications."""
    return PatientRecord(
        patient_id="P9000",
        visits=(
            (MedicalCode("diagnosis", "dx004"), MedicalCode("procedure", "px002")),
            (MedicalCode("diagnosis", "dx007"),),
        ),
        race="others",
        gender="female",
        age=20
    )


@pytest.fixture
def small_config():
    """A quick corpus configuration."""
    return GeneratorConfig(seed=3, patient_count=60, trial_count=2)


# FIXTURES FOR GENERATED CORPORA #


@pytest.fixture(scope="module")
def default_corpus():
    """The default-configuration corpus."""
    return generate(GeneratorConfig())


# TESTS FOR ORACLE_LABEL #


def test_age_inclusion_criterion(adult_patient):
    """Test that an adult satisfies 'age ≥ 18 years'."""
    criterion = Criterion(
        "T00-I0", "inclusion", "age ≥ 18 years",
        CriterionPredicate("age", operator=">=", threshold=18)
    )
    assert oracle_label(adult_patient, criterion) == "inclusion"


def test_matching_exclusion_criterion(adult_patient):
    """Test that a patient with the excluded code is labeled exclusion."""
    criterion = Criterion(
        "T00-E0", "exclusion", "history of dx007",
        CriterionPredicate("codes", category="diagnosis", codes=("dx007",))
    )
    assert oracle_label(adult_patient, criterion) == "exclusion"


def test_indeterminate_and_failing_predicates(adult_patient):
    """
    Test the cases labeled unknown.

    This function tests the following:
    1. A medication criterion with no medication codes is unknown.
    2. A diagnosis criterion naming an absent code is unknown.
    3. A failing age criterion is unknown.
    """
    medication = Criterion(
        "T00-I1", "inclusion", "patients currently taking rx001",
        CriterionPredicate("codes", category="medication", codes=("rx001",))
    )
    absent = Criterion(
        "T00-I2", "inclusion", "patients diagnosed with dx030",
        CriterionPredicate("codes", category="diagnosis", codes=("dx030",))
    )
    elderly = Criterion(
        "T00-E1", "exclusion", "age ≥ 80 years",
        CriterionPredicate("age", operator=">=", threshold=80)
    )

    assert oracle_label(adult_patient, medication) == "unknown"  # Test 1.
    assert oracle_label(adult_patient, absent) == "unknown"  # Test 2.
    assert oracle_label(adult_patient, elderly) == "unknown"  # Test 3.


# TESTS FOR GENERATE #


def test_generated_labels_match_oracle(small_config):
    """Test that every stored label equals the recomputed oracle label."""
    corpus = generate(small_config)

    for pair in corpus.pairs:
        patient = corpus.patient(pair.patient_id)
        criterion = corpus.criterion(pair.criterion_id)
        assert pair.label == oracle_label(patient, criterion), pair


def test_generated_structure(small_config):
    """
    Test the shape of a generated corpus.

    This function tests the following:
    1. Patient and trial counts follow the config.
    2. Every patient has at least one visit and no empty visit.
    3. Every trial has N = ceil(k/2) inclusion and Q = floor(k/2) exclusion
    criteria with k in the configured range, and kinds match their lists.
    4. Every (patient, criterion) pair is labeled exactly once.
    """
    corpus = generate(small_config)
    assert len(corpus.patients) == 60  # Test 1.
    assert len(corpus.trials) == 2  # Test 1.

    for patient in corpus.patients:
        assert patient.visits  # Test 2.
        assert all(visit for visit in patient.visits)  # Test 2.

    low, high = small_config.criteria_per_trial
    for trial in corpus.trials:
        total = len(trial.criteria)
        assert low <= total <= high  # Test 3.
        assert len(trial.inclusion_criteria) == (total + 1) // 2  # Test 3.
        assert all(c.kind == "inclusion" for c in trial.inclusion_criteria)
        assert all(c.kind == "exclusion" for c in trial.exclusion_criteria)

    keys = {(p.patient_id, p.criterion_id) for p in corpus.pairs}
    assert len(keys) == len(corpus.pairs)  # Test 4.
    assert len(keys) == 60 * len(corpus.criteria)  # Test 4.


def test_same_seed_gives_identical_files(small_config):
    """Test that two runs with one seed serialize byte-identically."""
    first = dumps_corpus(generate(small_config)).encode("utf-8")
    second = dumps_corpus(generate(small_config)).encode("utf-8")

    assert first == second


def test_default_split_sizes(default_corpus):
    """Test that the default corpus splits into 515 / 59 / 251 patients."""
    splits = split(default_corpus, GeneratorConfig().split_ratios, seed=7)

    sizes = [len(splits[name].patients) for name in ("train", "valid", "test")]
    assert sizes == [515, 59, 251]


def test_zero_bias_rates_agree_within_three_standard_errors():
    """Test that bias 0 leaves per-group inclusion rates statistically equal."""
    corpus = generate(GeneratorConfig(bias_strength=0.0))
    rates = label_rates(corpus, "race")

    first, second = rates.loc["white"], rates.loc["others"]
    pooled = (first["inclusion"] * first["pairs"]
              + second["inclusion"] * second["pairs"]) \
        / (first["pairs"] + second["pairs"])
    standard_error = math.sqrt(
        pooled * (1 - pooled) * (1 / first["pairs"] + 1 / second["pairs"])
    )
    assert abs(first["inclusion"] - second["inclusion"]) < 3 * standard_error


def test_bias_gap_grows_with_strength():
    """
    Test the planted bias.

    This function tests the following:
    1. The absolute race gap in inclusion rate never shrinks as bias grows.
    2. The favoured group gains: the signed gap at full bias is positive.
    """
    gaps = [
        inclusion_rate_gap(generate(GeneratorConfig(bias_strength=b)), "race")
        for b in (0.0, 0.25, 0.5, 0.75, 1.0)
    ]
    magnitudes = [abs(gap) for gap in gaps]

    assert all(
        later >= earlier for earlier, later in zip(magnitudes, magnitudes[1:])
    ), magnitudes  # Test 1.
    assert gaps[-1] > 0.0  # Test 2.


def test_bias_only_adds_codes_for_favoured_group(small_config):
    """Test that raising bias never removes a code from a favoured patient."""
    low = generate(GeneratorConfig(seed=3, patient_count=60, trial_count=2,
                                   bias_strength=0.2))
    high = generate(GeneratorConfig(seed=3, patient_count=60, trial_count=2,
                                    bias_strength=0.9))

    for before, after in zip(low.patients, high.patients):
        if before.race == "white" and before.gender == "male":
            for category in ("diagnosis", "medication", "procedure"):
                assert before.codes_in(category) - {"dx000"} <= \
                    after.codes_in(category)


@pytest.mark.parametrize("changes", [
    {"bias_strength": 1.5},
    {"group_proportions": {"race": {"white": 0.5, "others": 0.6},
                           "gender": {"male": 0.5, "female": 0.5}}},
    {"vocabulary_sizes": {"diagnosis": 0, "medication": 30, "procedure": 20}},
    {"criteria_per_trial": (4, 2)},
    {"split_ratios": (0.5, 0.5, 0.5)},
])
def test_invalid_config_rejected(changes):
    """Test that invalid proportions, vocabularies and ranges are rejected."""
    with pytest.raises(CorpusConfigError):
        generate(GeneratorConfig(**changes))


def test_config_round_trip_and_hash():
    """
    Test config dictionaries.

    This function tests the following:
    1. from_dict(to_dict()) restores an equal config.
    2. Equal configs share a hash; a changed seed changes it.
    3. Unknown keys are rejected.
    """
    config = GeneratorConfig(seed=11, bias_strength=0.3)
    restored = GeneratorConfig.from_dict(config.to_dict())

    assert restored == config  # Test 1.
    assert restored.config_hash() == config.config_hash()  # Test 2.
    assert GeneratorConfig(seed=12).config_hash() != config.config_hash()

    with pytest.raises(CorpusConfigError):
        GeneratorConfig.from_dict({"colour": "blue"})  # Test 3.


# TESTS FOR SPLIT #


def test_split_partitions_patients(default_corpus):
    """
    Test the patient-level split.

    This function tests the following:
    1. Splits are disjoint and cover every patient.
    2. All pairs of a patient stay with that patient.
    3. Every split keeps the whole trial set.
    """
    splits = split(default_corpus, (0.624, 0.072, 0.304), seed=1)
    ids = [set(s.patient_ids) for s in splits.values()]

    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    assert set().union(*ids) == set(default_corpus.patient_ids)  # Test 1.
    for part in splits.values():
        members = set(part.patient_ids)
        assert all(p.patient_id in members for p in part.pairs)  # Test 2.
        assert part.trials == default_corpus.trials  # Test 3.
    assert sum(len(s.pairs) for s in splits.values()) == \
        len(default_corpus.pairs)


def test_split_all_train(small_config):
    """Test that ratios 1/0/0 put every patient in train."""
    corpus = generate(small_config)
    splits = split(corpus, (1.0, 0.0, 0.0), seed=0)

    assert len(splits["train"].patients) == 60
    assert not splits["valid"].patients and not splits["test"].patients


def test_split_seeds_change_assignment_not_sizes(default_corpus):
    """Test that a different seed changes membership but keeps sizes."""
    first = split(default_corpus, (0.624, 0.072, 0.304), seed=1)
    second = split(default_corpus, (0.624, 0.072, 0.304), seed=2)

    for name in ("train", "valid", "test"):
        assert len(first[name].patients) == len(second[name].patients)
    assert first["train"].patient_ids != second["train"].patient_ids


@pytest.mark.parametrize("ratios", [
    (0.0, 0.5, 0.5), (0.7, 0.2, 0.2), (1.2, -0.1, -0.1), (0.5, 0.5)
])
def test_degenerate_ratios_rejected(small_config, ratios):
    """Test that ratios with no train share or a bad sum are rejected."""
    corpus = generate(small_config)

    with pytest.raises(CorpusConfigError):
        split(corpus, ratios, seed=0)
