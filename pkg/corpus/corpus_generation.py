"""
Seeded synthetic corpus generation with a rule oracle and planted bias.

This file contains the following functions:
1. oracle_label -> labels a (patient, criterion) pair from the rule.
2. generate -> builds patients, trials and oracle-labeled pairs.
3. split -> patient-level train / valid / test partition.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from corpus.corpus_models import (
    CATEGORIES, SENSITIVE_ATTRIBUTES, Corpus, Criterion, CriterionPredicate,
    LabeledPair, MedicalCode, PatientRecord, Trial
)

logger = logging.getLogger(__name__)

CODE_PREFIXES = {"diagnosis": "dx", "medication": "rx", "procedure": "px"}
# Diagnosis code 0 pads otherwise empty visits; criteria never reference it.
ROUTINE_CODE = "dx000"
CATEGORY_WEIGHTS = {"diagnosis": 0.5, "medication": 0.3, "procedure": 0.2}

INCLUSION_TEMPLATES = {
    "diagnosis": "patients diagnosed with {codes}",
    "medication": "patients currently taking {codes}",
    "procedure": "patients who underwent {codes}",
}
EXCLUSION_TEMPLATES = {
    "diagnosis": "history of {codes}",
    "medication": "current use of {codes}",
    "procedure": "prior {codes}",
}


class CorpusConfigError(ValueError):
    """Raised for an invalid generator configuration or split request."""


@dataclass
class GeneratorConfig:
    """Settings for the synthetic corpus; defaults follow the stroke cohort."""
    seed: int = 7
    patient_count: int = 825
    trial_count: int = 6
    criteria_per_trial: tuple[int, int] = (3, 6)
    vocabulary_sizes: dict = field(default_factory=lambda: {
        "diagnosis": 40, "medication": 30, "procedure": 20
    })
    group_proportions: dict = field(default_factory=lambda: {
        "race": {"white": 0.347, "others": 0.653},
        "gender": {"male": 0.571, "female": 0.429},
    })
    bias_strength: float = 0.75
    split_ratios: tuple[float, float, float] = (0.624, 0.072, 0.304)
    visits_per_patient: tuple[int, int] = (1, 4)
    codes_per_visit: float = 2.0
    age_mean: float = 65.0
    age_std: float = 14.0
    missing_category_rate: float = 0.15
    age_criterion_rate: float = 0.2
    favoured_groups: dict = field(default_factory=lambda: {
        "race": "white", "gender": "male"
    })
    skewed_code_fraction: float = 0.3

    def validate(self) -> None:
        """
        Checks the configuration before any generation happens.

        This function should:
        1. Reject non-positive counts and inverted ranges.
        2. Reject empty vocabularies.
        3. Reject proportions that do not cover each attribute's groups or
        do not sum to 1.
        4. Reject bias-strength outside [0, 1] and unknown favoured groups.
        5. Validate split ratios.
        """
        def check_range(name: str, bounds, minimum: int) -> None:
            low, high = bounds
            if low < minimum or high < low:
                raise CorpusConfigError(f"{name} must satisfy {minimum} <= "
                                        f"low <= high, got {bounds}")

        if self.patient_count < 0 or self.trial_count < 0:
            raise CorpusConfigError("patient_count and trial_count must be "
                                    ">= 0")
        check_range("criteria_per_trial", self.criteria_per_trial, 1)
        check_range("visits_per_patient", self.visits_per_patient, 1)

        for category in CATEGORIES:
            if self.vocabulary_sizes.get(category, 0) < 2:
                raise CorpusConfigError(
                    f"vocabulary for {category} is empty; need at least 2 codes"
                )

        for attribute, groups in SENSITIVE_ATTRIBUTES.items():
            proportions = self.group_proportions.get(attribute, {})
            if set(proportions) != set(groups):
                raise CorpusConfigError(
                    f"group_proportions[{attribute}] must name {groups}"
                )
            if any(value < 0 for value in proportions.values()) or \
                    abs(sum(proportions.values()) - 1.0) > 1e-9:
                raise CorpusConfigError(
                    f"group_proportions[{attribute}] must sum to 1"
                )
            if self.favoured_groups.get(attribute) not in groups:
                raise CorpusConfigError(
                    f"favoured_groups[{attribute}] must be one of {groups}"
                )

        if not 0.0 <= self.bias_strength <= 1.0:
            raise CorpusConfigError("bias_strength must lie in [0, 1]")
        for name in ("missing_category_rate", "age_criterion_rate",
                     "skewed_code_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise CorpusConfigError(f"{name} must lie in [0, 1]")
        if self.codes_per_visit <= 0 or self.age_std < 0:
            raise CorpusConfigError("codes_per_visit must be > 0 and "
                                    "age_std >= 0")
        check_split_ratios(self.split_ratios)

    def to_dict(self) -> dict:
        data = asdict(self)
        for name in ("criteria_per_trial", "split_ratios",
                     "visits_per_patient"):
            data[name] = list(data[name])
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise CorpusConfigError(f"Unknown generator config keys: {unknown}")
        values = dict(data)
        for name in ("criteria_per_trial", "split_ratios",
                     "visits_per_patient"):
            if name in values:
                values[name] = tuple(values[name])
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def from_json_file(cls, path: str) -> "GeneratorConfig":
        with open(path, mode="r", encoding="utf-8") as file:
            return cls.from_dict(json.load(file))

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def check_split_ratios(ratios) -> None:
    """Split ratios: three non-negative numbers, train > 0, sum 1."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or ratios[0] <= 0 \
            or abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusConfigError(
            f"split ratios must be three non-negative values with a positive "
            f"train share summing to 1, got {tuple(ratios)}"
        )


def oracle_label(patient: PatientRecord, criterion: Criterion) -> str:
    """
    Labels a pair from the criterion's rule.

    A holding predicate labels the pair with the criterion's kind; a
    failing or indeterminate predicate labels it "unknown".
    """
    if criterion.predicate.evaluate(patient) is True:
        return criterion.kind
    return "unknown"


def _code_vocabulary(config: GeneratorConfig) -> dict[str, list[str]]:
    return {
        category: [
            f"{CODE_PREFIXES[category]}{index:03d}"
            for index in range(config.vocabulary_sizes[category])
        ]
        for category in CATEGORIES
    }


def _skewed_codes(
        vocabulary: dict[str, list[str]],
        config: GeneratorConfig,
        rng: np.random.Generator
) -> dict[str, dict[str, str]]:
    """
    Chooses the group-skewed codes.

    Returns category -> code -> attribute. Each attribute gets a disjoint
    slice of every category's codes; the routine code is never skewed.
    """
    skewed = {}
    for category in CATEGORIES:
        candidates = [c for c in vocabulary[category] if c != ROUTINE_CODE]
        order = rng.permutation(len(candidates))
        per_attribute = int(round(config.skewed_code_fraction
                                  * len(candidates) / 2))
        assignment = {}
        for slot, attribute in enumerate(SENSITIVE_ATTRIBUTES):
            for index in order[slot * per_attribute:(slot + 1) * per_attribute]:
                assignment[candidates[index]] = attribute
        skewed[category] = assignment
    return skewed


def _make_criterion(
        criterion_id: str,
        kind: str,
        vocabulary: dict[str, list[str]],
        skewed: dict[str, dict[str, str]],
        config: GeneratorConfig,
        rng: np.random.Generator
) -> Criterion:
    """
    Draws one criterion and renders its text from a template.

    Inclusion code criteria prefer group-skewed codes, which is the planted
    bias channel; exclusion criteria use unskewed codes only.
    """
    draw_age = rng.random() < config.age_criterion_rate
    category = str(rng.choice(
        CATEGORIES, p=[CATEGORY_WEIGHTS[c] for c in CATEGORIES]
    ))
    code_count = int(rng.integers(1, 3))
    prefer_skewed = rng.random(code_count)
    lower_age = int(rng.choice([18, 40, 50]))
    upper_age = int(rng.choice([75, 80, 85]))
    use_upper = rng.random() < 0.5

    if draw_age:
        if kind == "exclusion":
            predicate = CriterionPredicate("age", operator=">=",
                                           threshold=upper_age)
            text = f"age ≥ {upper_age} years"
        elif use_upper:
            predicate = CriterionPredicate("age", operator="<",
                                           threshold=upper_age)
            text = f"age < {upper_age} years"
        else:
            predicate = CriterionPredicate("age", operator=">=",
                                           threshold=lower_age)
            text = f"age ≥ {lower_age} years"
        return Criterion(criterion_id, kind, text, predicate)

    plain = [c for c in vocabulary[category]
             if c != ROUTINE_CODE and c not in skewed[category]]
    biased = list(skewed[category])
    codes = []
    for preference in prefer_skewed:
        pool = biased if (kind == "inclusion" and biased
                          and preference < 0.6) else plain
        choices = [c for c in pool if c not in codes] or \
            [c for c in plain if c not in codes]
        codes.append(str(rng.choice(choices)))
    codes = tuple(sorted(codes))

    templates = INCLUSION_TEMPLATES if kind == "inclusion" \
        else EXCLUSION_TEMPLATES
    text = templates[category].format(codes=" or ".join(codes))
    predicate = CriterionPredicate("codes", category=category, codes=codes)
    return Criterion(criterion_id, kind, text, predicate)


def _make_trials(vocabulary, skewed, config, rng) -> tuple[Trial, ...]:
    trials = []
    for trial_index in range(config.trial_count):
        trial_id = f"T{trial_index:02d}"
        low, high = config.criteria_per_trial
        total = int(rng.integers(low, high + 1))
        inclusion_count = (total + 1) // 2
        exclusion_count = total // 2
        inclusion = tuple(
            _make_criterion(f"{trial_id}-I{k}", "inclusion", vocabulary,
                            skewed, config, rng)
            for k in range(inclusion_count)
        )
        exclusion = tuple(
            _make_criterion(f"{trial_id}-E{k}", "exclusion", vocabulary,
                            skewed, config, rng)
            for k in range(exclusion_count)
        )
        trials.append(Trial(trial_id, inclusion, exclusion))
    return tuple(trials)


def _draw_group(attribute: str, config: GeneratorConfig, rng) -> str:
    groups = SENSITIVE_ATTRIBUTES[attribute]
    weights = [config.group_proportions[attribute][g] for g in groups]
    return str(groups[int(rng.choice(len(groups), p=weights))])


def _make_patient(
        patient_index: int,
        vocabulary: dict[str, list[str]],
        skewed: dict[str, dict[str, str]],
        config: GeneratorConfig,
        rng: np.random.Generator
) -> PatientRecord:
    """
    Draws one patient record.

    The number of random draws never depends on bias_strength: every
    (visit, code) pair gets one uniform draw that is compared with a
    bias-dependent prevalence. For a fixed seed, raising the bias only adds
    skewed codes to favoured-group records and only removes them from the
    others.
    """
    race = _draw_group("race", config, rng)
    gender = _draw_group("gender", config, rng)
    groups = {"race": race, "gender": gender}
    age = int(np.clip(round(rng.normal(config.age_mean, config.age_std)),
                      0, 100))
    missing = {
        "diagnosis": False,
        "medication": rng.random() < config.missing_category_rate,
        "procedure": rng.random() < config.missing_category_rate,
    }
    low, high = config.visits_per_patient
    visit_count = int(rng.integers(low, high + 1))
    bias = config.bias_strength

    visits = []
    for _ in range(visit_count):
        visit = []
        for category in CATEGORIES:
            codes = vocabulary[category]
            draws = rng.random(len(codes))
            if missing[category]:
                continue
            base = min(1.0, config.codes_per_visit / len(codes))
            for code, draw in zip(codes, draws):
                prevalence = base
                attribute = skewed[category].get(code)
                if attribute is not None:
                    if groups[attribute] == config.favoured_groups[attribute]:
                        prevalence = base + bias * (min(1.0, 4.0 * base) - base)
                    else:
                        prevalence = base * (1.0 - bias)
                if draw < prevalence:
                    visit.append(MedicalCode(category, code))
        if not visit:
            visit.append(MedicalCode("diagnosis", ROUTINE_CODE))
        visits.append(tuple(visit))

    return PatientRecord(
        patient_id=f"P{patient_index:04d}",
        visits=tuple(visits),
        race=race,
        gender=gender,
        age=age
    )


def generate(config: GeneratorConfig) -> Corpus:
    """
    Generates a synthetic corpus.

    This function should:
    1. Validate the configuration.
    2. Build the code vocabulary and choose the group-skewed codes.
    3. Draw the trials and their criteria.
    4. Draw the patients.
    5. Label every (patient, criterion) pair with oracle_label.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    vocabulary = _code_vocabulary(config)
    skewed = _skewed_codes(vocabulary, config, rng)
    trials = _make_trials(vocabulary, skewed, config, rng)
    # Patients draw from their own stream so trial draws cannot shift them.
    patient_rng = np.random.default_rng([config.seed, 1])
    patients = tuple(
        _make_patient(index, vocabulary, skewed, config, patient_rng)
        for index in range(config.patient_count)
    )

    pairs = tuple(
        LabeledPair(patient.patient_id, criterion.criterion_id,
                    oracle_label(patient, criterion))
        for patient in patients
        for trial in trials
        for criterion in trial.criteria
    )
    logger.info(
        "generated %d patients, %d trials, %d pairs (seed=%d, bias=%.2f)",
        len(patients), len(trials), len(pairs), config.seed,
        config.bias_strength
    )
    return Corpus(patients=patients, trials=trials, pairs=pairs)


def split(corpus: Corpus, ratios, seed: int) -> dict[str, Corpus]:
    """
    Splits a corpus by patient.

    This function should:
    1. Validate the ratios.
    2. Shuffle patient ids with the seed.
    3. Cut train and valid sizes by rounding; test takes the remainder.
    4. Return sub-corpora that keep the original patient order.
    """
    check_split_ratios(ratios)
    ids = corpus.patient_ids
    count = len(ids)
    order = np.random.default_rng(seed).permutation(count)

    train_size = min(count, int(round(count * ratios[0])))
    valid_size = min(count - train_size, int(round(count * ratios[1])))

    assignment = {
        "train": order[:train_size],
        "valid": order[train_size:train_size + valid_size],
        "test": order[train_size + valid_size:],
    }
    return {
        name: corpus.subset(ids[index] for index in indices)
        for name, indices in assignment.items()
    }
