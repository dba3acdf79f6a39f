"""
Optional frozen feature vectors imported from a file.

Each line is a JSON object {"id": ..., "vector": [...]}. Visit vectors use
the id "<patient-id>/<visit-index>"; criterion vectors use the criterion id.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from corpus.corpus_models import Criterion, PatientRecord


class EmbeddingFileError(ValueError):
    """Raised for a malformed embedding record; names the line and field."""
    def __init__(self, line_number: int, field_name: str, detail: str = ""):
        self.line_number = line_number
        self.field_name = field_name
        message = f"line {line_number}: bad or missing field '{field_name}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


def visit_key(patient_id: str, visit_index: int) -> str:
    return f"{patient_id}/{visit_index}"


@dataclass(frozen=True)
class PrecomputedEmbeddings:
    """Id to vector map; every vector has length `dim`."""
    dim: int
    vectors: dict = field(default_factory=dict)

    def patient_vectors(self, patient: PatientRecord) -> Optional[np.ndarray]:
        """Returns the (visits, dim) matrix, or None unless every visit is covered."""
        keys = [visit_key(patient.patient_id, i)
                for i in range(len(patient.visits))]
        if not all(key in self.vectors for key in keys):
            return None
        return np.stack([self.vectors[key] for key in keys])

    def criterion_vector(self, criterion: Criterion) -> Optional[np.ndarray]:
        return self.vectors.get(criterion.criterion_id)


def load_precomputed_embeddings(
        path: str,
        expected_dim: Optional[int] = None
) -> PrecomputedEmbeddings:
    """
    Reads a precomputed-embedding file.

    This function should:
    1. Parse each non-blank line as a JSON object with "id" and "vector".
    2. Check every vector is a non-empty list of finite numbers of one
    common length (and of `expected_dim` when given).
    3. Reject duplicate ids.
    """
    vectors = {}
    dim = expected_dim

    with open(path, mode="r", encoding="utf-8") as file:
        for line_number, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as error:
                raise EmbeddingFileError(
                    line_number, "<record>", f"invalid JSON ({error.msg})"
                ) from error
            if not isinstance(record, dict) or "id" not in record:
                raise EmbeddingFileError(line_number, "id")
            if "vector" not in record:
                raise EmbeddingFileError(line_number, "vector")

            try:
                vector = np.array(record["vector"], dtype=np.float64)
            except (TypeError, ValueError) as error:
                raise EmbeddingFileError(line_number, "vector") from error
            if vector.ndim != 1 or vector.size == 0 \
                    or not np.all(np.isfinite(vector)):
                raise EmbeddingFileError(
                    line_number, "vector", "expected finite numbers"
                )
            if dim is None:
                dim = vector.size
            if vector.size != dim:
                raise EmbeddingFileError(
                    line_number, "vector",
                    f"length {vector.size}, expected {dim}"
                )

            key = str(record["id"])
            if key in vectors:
                raise EmbeddingFileError(line_number, "id",
                                         f"duplicate id {key!r}")
            vector.setflags(write=False)
            vectors[key] = vector

    return PrecomputedEmbeddings(dim=dim or 0, vectors=vectors)
