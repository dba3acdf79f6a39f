"""
Patient and criterion encoders plus the prediction head.

This file contains the following functions:
1. embed_visit -> mean of a visit's code embeddings.
2. encode_patients / encode_patient -> memory-network patient embeddings.
3. encode_criteria / encode_criterion -> convolution + highway criterion
embeddings.
4. highway -> the gated highway layer on its own.
5. predict_logits -> the fully connected head over combined features.

The batch forms build one tape for many items; the single-item forms are the
one-element case.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from corpus.corpus_models import Criterion, MedicalCode, PatientRecord
from encoders.encoder_params import EncoderInputError, EncoderParams
from encoders.precomputed import PrecomputedEmbeddings
from encoders.vocabulary import tokenize
from tensor_autodiff import primitives as P
from tensor_autodiff.tensor import Tensor, as_tensor, constant


def _visit_token_ids(
        visit: Sequence[MedicalCode],
        params: EncoderParams
) -> list[int]:
    if not visit:
        raise EncoderInputError("cannot embed an empty visit")
    return [params.vocabulary.token_id(code.code) for code in visit]


def embed_visit(visit: Sequence[MedicalCode], params: EncoderParams) -> Tensor:
    """Returns the mean embedding of the visit's code tokens, shape (d,)."""
    ids = _visit_token_ids(visit, params)
    rows = P.gather_rows(params.leaf("embedding"), ids)
    return P.mean(rows, axis=0)


def _visit_embeddings(
        patients: Sequence[PatientRecord],
        params: EncoderParams,
        precomputed: Optional[PrecomputedEmbeddings]
) -> tuple[Tensor, np.ndarray]:
    """
    Builds one embedding row per visit over the whole patient batch.

    This function should:
    1. Use frozen vectors for patients whose visits are all in `precomputed`.
    2. Pool code embeddings per visit for everyone else with one gather and
    one segment mean.
    3. Put the rows back into patient / visit order.
    4. Return the rows and the patient index of each row.
    """
    token_ids, token_segments = [], []
    frozen_rows = []
    # (source, row) per visit in patient order; source 0 = pooled, 1 = frozen
    placement = []
    owners = []
    pooled_count = 0

    for patient_index, patient in enumerate(patients):
        if not patient.visits:
            raise EncoderInputError(
                f"patient {patient.patient_id} has no visits"
            )
        vectors = precomputed.patient_vectors(patient) if precomputed else None
        for visit_index, visit in enumerate(patient.visits):
            owners.append(patient_index)
            if vectors is not None:
                placement.append((1, len(frozen_rows)))
                frozen_rows.append(vectors[visit_index])
                continue
            ids = _visit_token_ids(visit, params)
            placement.append((0, pooled_count))
            token_ids.extend(ids)
            token_segments.extend([pooled_count] * len(ids))
            pooled_count += 1

    parts = []
    if pooled_count:
        rows = P.gather_rows(params.leaf("embedding"), token_ids)
        parts.append(P.segment_mean(rows, token_segments, pooled_count))
    if frozen_rows:
        frozen = np.stack(frozen_rows)
        if frozen.shape[1] != params.dims.embedding_dim:
            raise EncoderInputError(
                f"precomputed visit vectors have length {frozen.shape[1]}, "
                f"expected {params.dims.embedding_dim}"
            )
        parts.append(constant(frozen))

    # a single source is already in patient / visit order
    if len(parts) == 1:
        return parts[0], np.asarray(owners)
    order = [row if source == 0 else pooled_count + row
             for source, row in placement]
    return P.gather_rows(P.concat(parts, axis=0), order), np.asarray(owners)


def encode_patients(
        patients: Sequence[PatientRecord],
        params: EncoderParams,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> Tensor:
    """
    Encodes patients with one-hop attention over their visits.

    This function should:
    1. Embed every visit.
    2. Project visits to keys with W_k and to values with W_v.
    3. Score each key against the learned query and softmax the scores
    within each patient.
    4. Sum the attention-weighted values per patient.

    Returns shape (patients, d_z).
    """
    if not patients:
        raise EncoderInputError("no patients to encode")
    visits, owners = _visit_embeddings(patients, params, precomputed)
    count = len(patients)

    keys = P.matmul(visits, params.leaf("memory.key"))
    scores = P.matmul(keys, params.leaf("memory.query"))
    weights = P.segment_softmax(scores, owners, count)
    values = P.matmul(visits, params.leaf("memory.value"))
    weighted = P.multiply(values, P.reshape(weights, (len(owners), 1)))
    return P.segment_sum(weighted, owners, count)


def encode_patient(
        patient: PatientRecord,
        params: EncoderParams,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> Tensor:
    """Returns z_P, shape (d_z,)."""
    batch = encode_patients([patient], params, precomputed)
    return P.reshape(batch, (params.dims.output_dim,))


def _criterion_sequence(
        criterion: Criterion,
        params: EncoderParams,
        precomputed: Optional[PrecomputedEmbeddings]
) -> Tensor:
    """Token embeddings of a criterion, or its frozen vector as one row."""
    if precomputed is not None:
        vector = precomputed.criterion_vector(criterion)
        if vector is not None:
            if vector.size != params.dims.embedding_dim:
                raise EncoderInputError(
                    f"precomputed vector for {criterion.criterion_id} has "
                    f"length {vector.size}, expected "
                    f"{params.dims.embedding_dim}"
                )
            return constant(vector.reshape(1, -1))
    ids = tokenize(criterion.text, params.vocabulary)
    return P.gather_rows(params.leaf("embedding"), ids)


def convolve_and_pool(sequence: Tensor, params: EncoderParams) -> Tensor:
    """
    Runs every convolution width over a (length, d) sequence.

    Inputs shorter than a width are right-padded with zero rows for that
    width. Each width gives relu activations max-pooled over positions; the
    pooled vectors are concatenated into shape (channels * widths,).
    """
    length = sequence.shape[0]
    pooled = []
    for width in params.dims.conv_widths:
        padded = sequence
        if length < width:
            padding = constant(np.zeros((width - length, sequence.shape[1])))
            padded = P.concat([sequence, padding], axis=0)
        conv = P.add(P.conv1d(padded, params.leaf(f"conv.w{width}")),
                     params.leaf(f"conv.b{width}"))
        pooled.append(P.max_pool(P.relu(conv), axis=0))
    return P.concat(pooled, axis=0)


def highway(features: Tensor, params: EncoderParams) -> Tensor:
    """y = T * H + (1 - T) * x with T = sigmoid(x W_T + b_T), H = tanh(x W_H + b_H)."""
    gate = P.sigmoid(P.add(P.matmul(features, params.leaf("highway.gate.w")),
                           params.leaf("highway.gate.b")))
    transform = P.tanh(P.add(
        P.matmul(features, params.leaf("highway.transform.w")),
        params.leaf("highway.transform.b")
    ))
    carry = P.subtract(1.0, gate)
    return P.add(P.multiply(gate, transform), P.multiply(carry, features))


def encode_criteria(
        criteria: Sequence[Criterion],
        params: EncoderParams,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> Tensor:
    """
    Encodes criteria with convolutions, a highway layer and a projection.

    This function should:
    1. Look up each criterion's token embeddings.
    2. Convolve and max-pool each one.
    3. Stack the pooled features and run the highway layer on the batch.
    4. Project to d_z.

    Returns shape (criteria, d_z).
    """
    if not criteria:
        raise EncoderInputError("no criteria to encode")
    hidden = params.dims.highway_dim
    features = P.concat([
        P.reshape(
            convolve_and_pool(_criterion_sequence(c, params, precomputed), params),
            (1, hidden)
        )
        for c in criteria
    ], axis=0)
    mixed = highway(features, params)
    return P.add(P.matmul(mixed, params.leaf("criterion.projection.w")),
                 params.leaf("criterion.projection.b"))


def encode_criterion(
        criterion: Criterion,
        params: EncoderParams,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> Tensor:
    """Returns z_c, shape (d_z,)."""
    batch = encode_criteria([criterion], params, precomputed)
    return P.reshape(batch, (params.dims.output_dim,))


def predict_logits(z_patient, z_criterion, params: EncoderParams) -> Tensor:
    """
    Applies the predictor to [z_P, z_c, z_P * z_c, |z_P - z_c|].

    Accepts single embeddings of shape (d_z,) or row batches (n, d_z).
    Logits are ordered (inclusion, exclusion, unknown).
    """
    z_patient, z_criterion = as_tensor(z_patient), as_tensor(z_criterion)
    d_z = params.dims.output_dim
    if z_patient.shape != z_criterion.shape or z_patient.shape[-1] != d_z:
        raise EncoderInputError(
            f"embedding shapes {z_patient.shape} and {z_criterion.shape} "
            f"do not match the model dimension {d_z}"
        )
    combined = P.concat([
        z_patient,
        z_criterion,
        P.multiply(z_patient, z_criterion),
        P.absolute(P.subtract(z_patient, z_criterion)),
    ], axis=-1)
    return P.add(P.matmul(combined, params.leaf("predictor.w")),
                 params.leaf("predictor.b"))
