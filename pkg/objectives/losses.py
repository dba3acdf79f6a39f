"""
Loss terms of the matching model.

This file contains the following functions:
1. cross_entropy -> categorical cross-entropy over the three classes.
2. similarity -> shifted cosine similarity in [0, 1].
3. criteria_discrepancy -> pulls matched inclusion pairs together and
pushes exclusion pairs past the margin kappa.
4. joint_loss -> mean cross-entropy plus mean discrepancy.
5. fairness_constraint -> ordered sum of group discrepancy gaps.
6. total_loss -> the weighted total as a LossBreakdown.

Every function takes one pair or a batch of rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from corpus.corpus_models import LABELS
from tensor_autodiff import primitives as P
from tensor_autodiff.tensor import Tensor, as_tensor, constant

LABEL_INDEX = {label: index for index, label in enumerate(LABELS)}
DISCREPANCY_KINDS = ("inclusion-match", "exclusion-nonmatch")


class LossInputError(ValueError):
    """Raised for loss inputs outside their domain."""


class ZeroVectorError(ValueError):
    """Raised when a similarity is asked of a zero vector."""


def one_hot(labels) -> np.ndarray:
    """Maps a label or a sequence of labels to one-hot rows."""
    if isinstance(labels, str):
        return np.eye(len(LABELS))[LABEL_INDEX[labels]]
    return np.eye(len(LABELS))[[LABEL_INDEX[label] for label in labels]]


def cross_entropy(logits, target) -> Tensor:
    """
    Returns -sum_k y_k log softmax(logits)_k per row.

    `target` must be one-hot with the same shape as `logits`; a (n, 3) batch
    gives shape (n,), a single (3,) pair gives a scalar.
    """
    logits = as_tensor(logits)
    target = np.asarray(target, dtype=np.float64)
    if target.shape != logits.shape or target.shape[-1] != len(LABELS) \
            or not np.all((target == 0.0) | (target == 1.0)) \
            or not np.all(target.sum(axis=-1) == 1.0):
        raise LossInputError(
            f"cross_entropy needs one-hot targets shaped like the logits "
            f"{logits.shape}, got {target.tolist()}"
        )
    picked = P.reduce_sum(
        P.multiply(P.log_softmax(logits, axis=-1), constant(target)), axis=-1
    )
    return P.scale(picked, -1.0)


def similarity(z_patient, z_criterion) -> Tensor:
    """(cos + 1) / 2 along the last axis; zero vectors are rejected."""
    z_patient, z_criterion = as_tensor(z_patient), as_tensor(z_criterion)
    if z_patient.shape != z_criterion.shape:
        raise LossInputError(
            f"similarity needs equal shapes, got {z_patient.shape} and "
            f"{z_criterion.shape}"
        )
    norm_patient = P.l2_norm(z_patient, axis=-1)
    norm_criterion = P.l2_norm(z_criterion, axis=-1)
    if np.any(norm_patient.data == 0.0) or np.any(norm_criterion.data == 0.0):
        raise ZeroVectorError("similarity is undefined for a zero vector")

    inner = P.reduce_sum(P.multiply(z_patient, z_criterion), axis=-1)
    cosine = P.divide(inner, P.multiply(norm_patient, norm_criterion))
    return P.scale(P.add(cosine, 1.0), 0.5)


def _check_kappa(kappa: float) -> None:
    if not 0.0 <= kappa <= 1.0:
        raise LossInputError(f"kappa must lie in [0, 1], got {kappa}")


def discrepancy_from_similarity(sim, kind: str, kappa: float) -> Tensor:
    """1 - sim for matched inclusion pairs, max(0, sim - kappa) for exclusion."""
    _check_kappa(kappa)
    if kind == "inclusion-match":
        # hinge keeps rounding just above 1 from going negative
        return P.hinge(P.subtract(1.0, sim))
    if kind == "exclusion-nonmatch":
        return P.hinge(P.subtract(sim, kappa))
    raise LossInputError(f"unknown discrepancy kind {kind!r}")


def criteria_discrepancy(z_patient, z_criterion, kind: str,
                         kappa: float = 0.5) -> Tensor:
    return discrepancy_from_similarity(
        similarity(z_patient, z_criterion), kind, kappa
    )


def pair_discrepancies(sim: Tensor, labels: Sequence[str],
                       kappa: float) -> Tensor:
    """
    Per-pair discrepancy for a batch.

    Pairs labeled inclusion use the matched-inclusion case, pairs labeled
    exclusion the exclusion case, and unknown pairs contribute 0.
    """
    inclusion = np.array([label == "inclusion" for label in labels], dtype=float)
    exclusion = np.array([label == "exclusion" for label in labels], dtype=float)
    pulled = discrepancy_from_similarity(sim, "inclusion-match", kappa)
    pushed = discrepancy_from_similarity(sim, "exclusion-nonmatch", kappa)
    return P.add(P.multiply(pulled, constant(inclusion)),
                 P.multiply(pushed, constant(exclusion)))


@dataclass
class MatchBatch:
    """Model outputs for a batch of (patient, criterion) pairs."""
    logits: Tensor
    z_patients: Tensor
    z_criteria: Tensor
    labels: tuple[str, ...]
    groups: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def contributing(self) -> np.ndarray:
        """Mask of pairs that carry a discrepancy term."""
        return np.array([label != "unknown" for label in self.labels])

    def check(self) -> None:
        count = len(self.labels)
        if count == 0:
            raise LossInputError("empty batch")
        shapes = (self.logits.shape[0], self.z_patients.shape[0],
                  self.z_criteria.shape[0], len(self.groups))
        if any(size != count for size in shapes):
            raise LossInputError(f"batch parts disagree in length: {shapes}")
        unknown = set(self.labels) - set(LABELS)
        if unknown:
            raise LossInputError(f"unknown labels in batch: {sorted(unknown)}")


def _masked_mean(values: Tensor, mask: np.ndarray) -> Tensor:
    """Mean of the masked entries; 0 when the mask is empty."""
    count = int(mask.sum())
    if count == 0:
        return constant(0.0)
    return P.scale(P.reduce_sum(P.multiply(values, constant(mask.astype(float)))),
                   1.0 / count)


@dataclass
class BatchGroupView:
    """Per-pair group membership and discrepancy contributions."""
    groups: tuple[str, ...]
    contributions: Tensor
    contributing: np.ndarray

    @classmethod
    def from_batch(cls, batch: MatchBatch, kappa: float) -> "BatchGroupView":
        sim = similarity(batch.z_patients, batch.z_criteria)
        return cls(tuple(batch.groups),
                   pair_discrepancies(sim, batch.labels, kappa),
                   batch.contributing)

    def group_losses(self) -> dict[str, Tensor]:
        """Mean contribution per group over its contributing pairs, sorted by group."""
        groups = np.asarray(self.groups, dtype=object)
        losses = {}
        for group in sorted(set(self.groups)):
            mask = (groups == group) & self.contributing
            if mask.any():
                losses[group] = _masked_mean(self.contributions, mask)
        return losses


def joint_loss(batch: MatchBatch, kappa: float = 0.5) -> tuple[Tensor, Tensor]:
    """
    Returns (L_CE, L_CD) for a batch; their sum is the joint loss.

    This function should:
    1. Reject empty or inconsistent batches.
    2. Average cross-entropy over every pair.
    3. Average the discrepancy over pairs labeled inclusion or exclusion.
    """
    batch.check()
    _check_kappa(kappa)
    l_ce = P.mean(cross_entropy(batch.logits, one_hot(batch.labels)))
    view = BatchGroupView.from_batch(batch, kappa)
    l_cd = _masked_mean(view.contributions, view.contributing)
    return l_ce, l_cd


def fairness_constraint(view: BatchGroupView) -> Tensor:
    """
    Sums |L_i - L_j| over ordered pairs of distinct groups present.

    Each unordered pair is counted twice. Groups without contributing pairs
    are skipped; fewer than two groups give 0.
    """
    losses = view.group_losses()
    names = list(losses)
    total = constant(0.0)
    for first in names:
        for second in names:
            if first != second:
                gap = P.absolute(P.subtract(losses[first], losses[second]))
                total = P.add(total, gap)
    return total


@dataclass
class LossBreakdown:
    """Values of one loss evaluation; `graph` is the differentiable total."""
    l_ce: float
    l_cd: float
    l_fc: float
    total: float
    lambda_fc: float
    kappa: float
    graph: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "l_ce": self.l_ce,
            "l_cd": self.l_cd,
            "l_fc": self.l_fc,
            "total": self.total,
            "lambda_fc": self.lambda_fc,
            "kappa": self.kappa,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LossBreakdown":
        return cls(**{key: float(data[key]) for key in (
            "l_ce", "l_cd", "l_fc", "total", "lambda_fc", "kappa")})


def total_loss(batch: MatchBatch, lambda_fc: float,
               kappa: float = 0.5) -> LossBreakdown:
    """
    Computes L_CE + L_CD + lambda_fc * L_FC.

    This function should:
    1. Reject a negative lambda_fc or a kappa outside [0, 1].
    2. Build the joint loss and the fairness constraint on one tape.
    3. Return the values and the differentiable total.
    """
    if lambda_fc < 0:
        raise LossInputError(f"lambda_fc must be >= 0, got {lambda_fc}")
    batch.check()
    _check_kappa(kappa)

    l_ce = P.mean(cross_entropy(batch.logits, one_hot(batch.labels)))
    view = BatchGroupView.from_batch(batch, kappa)
    l_cd = _masked_mean(view.contributions, view.contributing)
    l_fc = fairness_constraint(view)
    total = P.add(P.add(l_ce, l_cd), P.scale(l_fc, lambda_fc))

    return LossBreakdown(
        l_ce=l_ce.item(),
        l_cd=l_cd.item(),
        l_fc=l_fc.item(),
        total=total.item(),
        lambda_fc=float(lambda_fc),
        kappa=float(kappa),
        graph=total
    )
