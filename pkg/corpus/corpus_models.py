"""
Data model for patients, eligibility criteria, trials and labeled pairs.

This file contains the following:
1. MedicalCode -> one diagnosis / medication / procedure token.
2. PatientRecord -> visits of codes plus the sensitive attributes and age.
3. CriterionPredicate -> the structured rule behind a criterion's text.
4. Criterion / Trial -> eligibility criteria grouped per trial.
5. LabeledPair -> a (patient, criterion) pair with its oracle label.
6. Corpus -> patients, trials and pairs with lookups and subsetting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

CATEGORIES = ("diagnosis", "medication", "procedure")
CRITERION_KINDS = ("inclusion", "exclusion")
LABELS = ("inclusion", "exclusion", "unknown")
SENSITIVE_ATTRIBUTES = {
    "race": ("white", "others"),
    "gender": ("male", "female"),
}


@dataclass(frozen=True)
class MedicalCode:
    """One medical code token with its category."""
    category: str
    code: str


@dataclass(frozen=True)
class PatientRecord:
    """A patient's visits plus sensitive attributes."""
    patient_id: str
    visits: tuple[tuple[MedicalCode, ...], ...]
    race: str
    gender: str
    age: int

    def group(self, attribute: str) -> str:
        """Returns the patient's value for a sensitive attribute."""
        if attribute not in SENSITIVE_ATTRIBUTES:
            raise ValueError(f"Unknown sensitive attribute: {attribute}")
        return getattr(self, attribute)

    def codes_in(self, category: str) -> set[str]:
        """Returns every code of one category seen across all visits."""
        return {
            code.code
            for visit in self.visits
            for code in visit
            if code.category == category
        }


@dataclass(frozen=True)
class CriterionPredicate:
    """
    The rule a criterion's text describes.

    kind "codes": holds when the patient has any of `codes` (all from
    `category`); indeterminate when the patient has no code of that
    category at all. kind "age": compares the patient's age with
    `threshold` using `operator` (">=" or "<"); always determinate.
    """
    kind: str
    category: Optional[str] = None
    codes: tuple[str, ...] = ()
    operator: Optional[str] = None
    threshold: Optional[int] = None

    def evaluate(self, patient: PatientRecord) -> Optional[bool]:
        """Returns True / False, or None when the record cannot decide."""
        if self.kind == "age":
            if self.operator == ">=":
                return patient.age >= self.threshold
            return patient.age < self.threshold

        present = patient.codes_in(self.category)
        if not present:
            return None
        return any(code in present for code in self.codes)


@dataclass(frozen=True)
class Criterion:
    """An inclusion or exclusion criterion with its text and rule."""
    criterion_id: str
    kind: str
    text: str
    predicate: CriterionPredicate

    @property
    def tokens(self) -> list[str]:
        return self.text.lower().split()


@dataclass(frozen=True)
class Trial:
    """A trial: N >= 1 inclusion criteria and Q >= 0 exclusion criteria."""
    trial_id: str
    inclusion_criteria: tuple[Criterion, ...]
    exclusion_criteria: tuple[Criterion, ...] = ()

    @property
    def criteria(self) -> tuple[Criterion, ...]:
        return self.inclusion_criteria + self.exclusion_criteria


@dataclass(frozen=True)
class LabeledPair:
    """A (patient, criterion) pair labeled by the rule oracle."""
    patient_id: str
    criterion_id: str
    label: str


@dataclass(frozen=True)
class Corpus:
    """Patients, trials and labeled pairs; immutable once built."""
    patients: tuple[PatientRecord, ...] = ()
    trials: tuple[Trial, ...] = ()
    pairs: tuple[LabeledPair, ...] = ()
    _patient_index: dict = field(
        default=None, init=False, repr=False, compare=False
    )
    _criterion_index: dict = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        object.__setattr__(
            self, "_patient_index", {p.patient_id: p for p in self.patients}
        )
        criteria = {}
        for trial in self.trials:
            for criterion in trial.criteria:
                criteria[criterion.criterion_id] = (criterion, trial.trial_id)
        object.__setattr__(self, "_criterion_index", criteria)

    def patient(self, patient_id: str) -> PatientRecord:
        return self._patient_index[patient_id]

    def criterion(self, criterion_id: str) -> Criterion:
        return self._criterion_index[criterion_id][0]

    def trial_of(self, criterion_id: str) -> str:
        """Returns the id of the trial a criterion belongs to."""
        return self._criterion_index[criterion_id][1]

    @property
    def criteria(self) -> list[Criterion]:
        return [entry[0] for entry in self._criterion_index.values()]

    @property
    def patient_ids(self) -> list[str]:
        return [p.patient_id for p in self.patients]

    def subset(self, patient_ids: Iterable[str]) -> "Corpus":
        """
        Restricts the corpus to some patients.

        The trial set is kept whole; patients and pairs keep their original
        order.
        """
        keep = set(patient_ids)
        return Corpus(
            patients=tuple(p for p in self.patients if p.patient_id in keep),
            trials=self.trials,
            pairs=tuple(
                pair for pair in self.pairs if pair.patient_id in keep
            )
        )
