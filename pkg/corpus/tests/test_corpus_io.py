"""
Unit tests for corpus/corpus_io.py
"""
import json

import pytest
from corpus.corpus_generation import GeneratorConfig, generate, split
from corpus.corpus_io import (
    CorpusParseError, label_rates, load_corpus, load_corpus_dir,
    loads_corpus, save_corpus, save_corpus_dir, write_text_atomic
)
from corpus.corpus_models import Corpus

# FIXTURES #


@pytest.fixture(scope="module")
def corpus():
    """A small generated corpus."""
    return generate(GeneratorConfig(seed=5, patient_count=40, trial_count=2))


@pytest.fixture
def corpus_file(tmp_path, corpus):
    """The small corpus saved to disk."""
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, path)
    return path


# TESTS FOR SAVE / LOAD #


def test_round_trip_is_structurally_equal(corpus, corpus_file):
    """Test that loading a saved corpus gives back an equal corpus."""
    assert load_corpus(corpus_file) == corpus


def test_file_is_one_record_per_line(corpus, corpus_file):
    """
    Test the file layout.

    This function tests the following:
    1. Every line is a JSON object with a known kind.
    2. There is one line per patient, trial and pair.
    3. Field names use the kebab-case names.
    """
    lines = corpus_file.read_text(encoding="utf-8").splitlines()
    records = [json.loads(line) for line in lines]

    kinds = {record["kind"] for record in records}
    assert kinds == {"patient", "trial", "labeled-pair"}  # Test 1.
    assert len(lines) == len(corpus.patients) + len(corpus.trials) \
        + len(corpus.pairs)  # Test 2.
    assert "patient-id" in records[0]  # Test 3.
    trial = next(r for r in records if r["kind"] == "trial")
    assert "oracle-predicate" in trial["inclusion-criteria"][0]  # Test 3.


def test_truncated_file_names_line(corpus_file):
    """Test that a truncated final record reports its line number."""
    text = corpus_file.read_text(encoding="utf-8")
    lines = text.splitlines()
    truncated = "\n".join(lines[:-1] + [lines[-1][:10]])

    with pytest.raises(CorpusParseError) as info:
        loads_corpus(truncated)
    assert info.value.line_number == len(lines)
    assert f"line {len(lines)}" in str(info.value)


def test_missing_field_names_field():
    """Test that a record without a label reports the field name."""
    text = json.dumps({"kind": "labeled-pair", "patient-id": "P0000",
                       "criterion-id": "T00-I0"})

    with pytest.raises(CorpusParseError) as info:
        loads_corpus(text)
    assert info.value.field_name == "label"
    assert info.value.line_number == 1


@pytest.mark.parametrize("record, field", [
    ({"kind": "patient", "patient-id": "P1", "visits": [],
      "race": "white", "gender": "male", "age": 40}, "visits"),
    ({"kind": "patient", "patient-id": "P1",
      "visits": [[{"category": "diagnosis", "code": "dx001"}]],
      "race": "purple", "gender": "male", "age": 40}, "race"),
    ({"kind": "labeled-pair", "patient-id": "P1", "criterion-id": "C",
      "label": "maybe"}, "label"),
    ({"kind": "visit"}, "kind"),
])
def test_invalid_values_rejected(record, field):
    """Test that invalid values are reported with their field."""
    with pytest.raises(CorpusParseError) as info:
        loads_corpus(json.dumps(record))
    assert info.value.field_name == field


def test_empty_file_is_empty_corpus(tmp_path):
    """Test that an empty file loads as an empty corpus without error."""
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")

    assert load_corpus(path) == Corpus()


def test_corpus_dir_round_trip(tmp_path, corpus):
    """Test that split files written to a directory load back unchanged."""
    splits = split(corpus, (0.6, 0.2, 0.2), seed=0)
    save_corpus_dir(corpus, splits, tmp_path / "out")

    loaded = load_corpus_dir(tmp_path / "out")
    for name in ("train", "valid", "test"):
        assert loaded[name] == splits[name]


def test_missing_corpus_dir(tmp_path):
    """Test that a missing directory raises FileNotFoundError naming it."""
    with pytest.raises(FileNotFoundError) as info:
        load_corpus_dir(tmp_path / "nowhere")
    assert "nowhere" in str(info.value)


def test_write_text_atomic_replaces(tmp_path):
    """Test that an atomic write replaces content and leaves no temp files."""
    path = tmp_path / "nested" / "out.txt"
    write_text_atomic(path, "first")
    write_text_atomic(path, "second")

    assert path.read_text(encoding="utf-8") == "second"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


# TESTS FOR LABEL_RATES #


def test_label_rates_sum_to_one(corpus):
    """
    Test the per-group summary.

    This function tests the following:
    1. Both groups are listed.
    2. Label shares of each group sum to 1.
    3. Patient counts add up to the corpus size.
    """
    rates = label_rates(corpus, "gender")

    assert list(rates.index) == ["male", "female"]  # Test 1.
    shares = rates[["inclusion", "exclusion", "unknown"]].sum(axis=1)
    assert all(abs(value - 1.0) < 1e-12 for value in shares)  # Test 2.
    assert rates["patients"].sum() == len(corpus.patients)  # Test 3.
