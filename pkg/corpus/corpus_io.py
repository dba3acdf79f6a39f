"""
This file provides reading and writing of corpus files.

Corpus files hold one JSON record per line. Three record kinds are
distinguished by a "kind" field: "patient", "trial" and "labeled-pair".
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Union

import pandas as pd

from corpus.corpus_models import (
    CATEGORIES, CRITERION_KINDS, LABELS, SENSITIVE_ATTRIBUTES, Corpus,
    Criterion, CriterionPredicate, LabeledPair, MedicalCode, PatientRecord,
    Trial
)

SPLIT_NAMES = ("train", "valid", "test")
CORPUS_FILE = "corpus.jsonl"
PROVENANCE_FILE = "provenance.json"

PathLike = Union[str, Path]


class CorpusParseError(ValueError):
    """Raised for a malformed corpus record; names the line and field."""
    def __init__(self, line_number: int, field_name: str, detail: str = ""):
        self.line_number = line_number
        self.field_name = field_name
        message = f"line {line_number}: bad or missing field '{field_name}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


def write_text_atomic(path: PathLike, text: str) -> None:
    """
    Writes a text file in one step.

    This function should:
    1. Write the text to a temporary file in the target directory.
    2. Rename it over the target so readers never see a partial file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(handle, mode="w", encoding="utf-8", newline="\n") as file:
            file.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.remove(temp_name)
        raise


# RECORD ENCODING #


def _criterion_record(criterion: Criterion) -> dict:
    predicate = criterion.predicate
    return {
        "criterion-id": criterion.criterion_id,
        "kind": criterion.kind,
        "text": criterion.text,
        "oracle-predicate": {
            "kind": predicate.kind,
            "category": predicate.category,
            "codes": list(predicate.codes),
            "operator": predicate.operator,
            "threshold": predicate.threshold,
        },
    }


def corpus_records(corpus: Corpus) -> list[dict]:
    """Returns the corpus as a list of records: patients, trials, pairs."""
    records = []
    for patient in corpus.patients:
        records.append({
            "kind": "patient",
            "patient-id": patient.patient_id,
            "visits": [
                [{"category": c.category, "code": c.code} for c in visit]
                for visit in patient.visits
            ],
            "race": patient.race,
            "gender": patient.gender,
            "age": patient.age,
        })
    for trial in corpus.trials:
        records.append({
            "kind": "trial",
            "trial-id": trial.trial_id,
            "inclusion-criteria": [
                _criterion_record(c) for c in trial.inclusion_criteria
            ],
            "exclusion-criteria": [
                _criterion_record(c) for c in trial.exclusion_criteria
            ],
        })
    for pair in corpus.pairs:
        records.append({
            "kind": "labeled-pair",
            "patient-id": pair.patient_id,
            "criterion-id": pair.criterion_id,
            "label": pair.label,
        })
    return records


def dumps_corpus(corpus: Corpus) -> str:
    """Renders a corpus as JSON lines text."""
    return "".join(
        json.dumps(record, ensure_ascii=False) + "\n"
        for record in corpus_records(corpus)
    )


def save_corpus(corpus: Corpus, path: PathLike) -> None:
    write_text_atomic(path, dumps_corpus(corpus))


# RECORD DECODING #


def _parse_criterion(data: dict, list_kind: str, line_number: int) -> Criterion:
    """
    Parses one criterion inside a trial record.

    This function should:
    1. Read the id, kind and text fields.
    2. Check the kind matches the list it came from.
    3. Rebuild the oracle predicate.
    """
    def field_of(container: dict, name: str):
        if not isinstance(container, dict) or name not in container:
            raise CorpusParseError(line_number, name)
        return container[name]

    kind = field_of(data, "kind")
    if kind != list_kind:
        raise CorpusParseError(
            line_number, "kind",
            f"criterion kind {kind!r} inside {list_kind} list"
        )
    text = field_of(data, "text")
    if not isinstance(text, str):
        raise CorpusParseError(line_number, "text", "expected a string")

    raw = field_of(data, "oracle-predicate")
    predicate_kind = field_of(raw, "kind")
    if predicate_kind == "age":
        operator = field_of(raw, "operator")
        threshold = field_of(raw, "threshold")
        if operator not in (">=", "<") or not isinstance(threshold, int):
            raise CorpusParseError(line_number, "oracle-predicate")
        predicate = CriterionPredicate("age", operator=operator,
                                       threshold=threshold)
    elif predicate_kind == "codes":
        category = field_of(raw, "category")
        codes = field_of(raw, "codes")
        if category not in CATEGORIES or not isinstance(codes, list) \
                or not codes:
            raise CorpusParseError(line_number, "oracle-predicate")
        predicate = CriterionPredicate("codes", category=category,
                                       codes=tuple(codes))
    else:
        raise CorpusParseError(line_number, "oracle-predicate",
                               f"unknown predicate kind {predicate_kind!r}")

    return Criterion(
        criterion_id=str(field_of(data, "criterion-id")),
        kind=kind,
        text=text,
        predicate=predicate
    )


def _parse_record(record, line_number: int):
    """Turns one decoded JSON object into a model object."""
    def field_of(name: str):
        if name not in record:
            raise CorpusParseError(line_number, name)
        return record[name]

    if not isinstance(record, dict):
        raise CorpusParseError(line_number, "kind", "record is not an object")

    kind = field_of("kind")
    if kind == "patient":
        visits = field_of("visits")
        if not isinstance(visits, list) or not visits or \
                not all(isinstance(v, list) and v for v in visits):
            raise CorpusParseError(line_number, "visits",
                                   "expected non-empty visits")
        try:
            parsed_visits = tuple(
                tuple(MedicalCode(c["category"], c["code"]) for c in visit)
                for visit in visits
            )
        except (KeyError, TypeError) as error:
            raise CorpusParseError(line_number, "visits") from error
        if any(c.category not in CATEGORIES
               for visit in parsed_visits for c in visit):
            raise CorpusParseError(line_number, "visits", "unknown category")

        race, gender, age = field_of("race"), field_of("gender"), \
            field_of("age")
        if race not in SENSITIVE_ATTRIBUTES["race"]:
            raise CorpusParseError(line_number, "race")
        if gender not in SENSITIVE_ATTRIBUTES["gender"]:
            raise CorpusParseError(line_number, "gender")
        if not isinstance(age, int) or age < 0:
            raise CorpusParseError(line_number, "age")
        return PatientRecord(str(field_of("patient-id")), parsed_visits,
                             race, gender, age)

    if kind == "trial":
        inclusion = field_of("inclusion-criteria")
        exclusion = field_of("exclusion-criteria")
        if not isinstance(inclusion, list) or not inclusion:
            raise CorpusParseError(line_number, "inclusion-criteria",
                                   "need at least one inclusion criterion")
        if not isinstance(exclusion, list):
            raise CorpusParseError(line_number, "exclusion-criteria")
        return Trial(
            trial_id=str(field_of("trial-id")),
            inclusion_criteria=tuple(
                _parse_criterion(c, "inclusion", line_number)
                for c in inclusion
            ),
            exclusion_criteria=tuple(
                _parse_criterion(c, "exclusion", line_number)
                for c in exclusion
            )
        )

    if kind == "labeled-pair":
        label = field_of("label")
        if label not in LABELS:
            raise CorpusParseError(line_number, "label",
                                   f"unknown label {label!r}")
        return LabeledPair(str(field_of("patient-id")),
                           str(field_of("criterion-id")), label)

    raise CorpusParseError(line_number, "kind",
                           f"unknown record kind {kind!r}")


def loads_corpus(text: str) -> Corpus:
    """
    Parses JSON lines text into a corpus.

    This function should:
    1. Skip blank lines; an empty text is an empty corpus.
    2. Decode each line, reporting the line number on failure.
    3. Sort records into patients, trials and pairs keeping file order.
    """
    patients, trials, pairs = [], [], []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as error:
            raise CorpusParseError(line_number, "<record>",
                                   f"invalid JSON ({error.msg})") from error
        parsed = _parse_record(record, line_number)
        if isinstance(parsed, PatientRecord):
            patients.append(parsed)
        elif isinstance(parsed, Trial):
            trials.append(parsed)
        else:
            pairs.append(parsed)
    return Corpus(tuple(patients), tuple(trials), tuple(pairs))


def load_corpus(path: PathLike) -> Corpus:
    with open(path, mode="r", encoding="utf-8") as file:
        return loads_corpus(file.read())


# CORPUS DIRECTORIES #


def save_corpus_dir(
        corpus: Corpus,
        splits: dict[str, Corpus],
        out_dir: PathLike
) -> dict[str, Path]:
    """Writes the full corpus plus one file per split; returns the paths."""
    out_dir = Path(out_dir)
    paths = {"corpus": out_dir / CORPUS_FILE}
    save_corpus(corpus, paths["corpus"])
    for name in SPLIT_NAMES:
        paths[name] = out_dir / f"{name}.jsonl"
        save_corpus(splits[name], paths[name])
    return paths


def load_corpus_dir(corpus_dir: PathLike) -> dict[str, Corpus]:
    """
    Loads the three split files of a corpus directory.

    This function should:
    1. Check that the directory and every split file exist.
    2. Load each split.
    """
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {corpus_dir}")
    splits = {}
    for name in SPLIT_NAMES:
        path = corpus_dir / f"{name}.jsonl"
        if not path.is_file():
            raise FileNotFoundError(f"split file not found: {path}")
        splits[name] = load_corpus(path)
    return splits


# SUMMARIES #


def label_table(corpus: Corpus) -> pd.DataFrame:
    """One row per labeled pair with its patient's sensitive attributes."""
    rows = []
    for pair in corpus.pairs:
        patient = corpus.patient(pair.patient_id)
        rows.append({
            "patient_id": pair.patient_id,
            "criterion_id": pair.criterion_id,
            "criterion_kind": corpus.criterion(pair.criterion_id).kind,
            "label": pair.label,
            "race": patient.race,
            "gender": patient.gender,
        })
    columns = ["patient_id", "criterion_id", "criterion_kind", "label",
               "race", "gender"]
    return pd.DataFrame(rows, columns=columns)


def label_rates(corpus: Corpus, attribute: str) -> pd.DataFrame:
    """
    Summarises label rates per group of a sensitive attribute.

    Returns a frame indexed by group with columns patients, pairs and the
    share of pairs carrying each label. Groups with no patients are listed
    with zero counts and NaN rates.
    """
    if attribute not in SENSITIVE_ATTRIBUTES:
        raise ValueError(f"Unknown sensitive attribute: {attribute}")
    groups = list(SENSITIVE_ATTRIBUTES[attribute])
    table = label_table(corpus)

    patients = pd.Series(
        [p.group(attribute) for p in corpus.patients], dtype=object
    ).value_counts().reindex(groups, fill_value=0)
    pairs = table.groupby(attribute).size().reindex(groups, fill_value=0)
    shares = pd.crosstab(table[attribute], table["label"], normalize="index")
    shares = shares.reindex(index=groups, columns=list(LABELS)).fillna(0.0)
    shares.loc[pairs == 0, :] = float("nan")

    summary = pd.DataFrame({"patients": patients, "pairs": pairs})
    summary = summary.join(shares)
    summary.index.name = attribute
    return summary


def inclusion_rate_gap(corpus: Corpus, attribute: str) -> float:
    """Signed inclusion-label rate of the first group minus the second."""
    rates = label_rates(corpus, attribute)["inclusion"]
    first, second = SENSITIVE_ATTRIBUTES[attribute]
    return float(rates[first] - rates[second])


def criterion_kind_counts(corpus: Corpus) -> dict[str, int]:
    counts = {kind: 0 for kind in CRITERION_KINDS}
    for criterion in corpus.criteria:
        counts[criterion.kind] += 1
    return counts
