"""
The training loop.

This file contains the following:
1. build_match_batch -> encodes a list of pairs into a MatchBatch.
2. evaluate_split -> loss and accuracy of a whole split in one batch.
3. train -> minibatch optimisation with early stopping on validation loss.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from corpus.corpus_models import LABELS, Corpus, LabeledPair
from encoders.encoder_params import EncoderParams, init_encoder_params
from encoders.encoders import encode_criteria, encode_patients, predict_logits
from encoders.precomputed import PrecomputedEmbeddings
from encoders.vocabulary import build_vocabulary
from objectives.adversary import (
    AdversaryParams, adversary_constraint, adversary_loss, init_adversary_params
)
from objectives.losses import LossBreakdown, MatchBatch, total_loss
from tensor_autodiff import primitives as P
from tensor_autodiff.backward import backward
from trainer.batching import make_batches
from trainer.optimizers import DivergenceError, make_optimizer
from trainer.train_config import TrainConfig, TrainConfigError

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    """Losses of one completed epoch."""
    epoch: int
    train: LossBreakdown
    valid: LossBreakdown
    valid_accuracy: float
    improved: bool
    adversary_loss: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train": self.train.to_dict(),
            "valid": self.valid.to_dict(),
            "valid-accuracy": self.valid_accuracy,
            "improved": self.improved,
            "adversary-loss": self.adversary_loss,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpochRecord":
        return cls(
            epoch=int(data["epoch"]),
            train=LossBreakdown.from_dict(data["train"]),
            valid=LossBreakdown.from_dict(data["valid"]),
            valid_accuracy=float(data["valid-accuracy"]),
            improved=bool(data["improved"]),
            adversary_loss=data.get("adversary-loss"),
        )


@dataclass
class TrainHistory:
    """One record per completed epoch, plus the best epoch's adversary."""
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    adversary: Optional[AdversaryParams] = field(
        default=None, repr=False, compare=False
    )

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def best(self) -> EpochRecord:
        return self.epochs[self.best_epoch - 1]

    def to_dict(self) -> dict:
        return {
            "best-epoch": self.best_epoch,
            "epochs": [record.to_dict() for record in self.epochs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainHistory":
        return cls(
            epochs=[EpochRecord.from_dict(r) for r in data["epochs"]],
            best_epoch=int(data["best-epoch"]),
        )


def pair_groups(corpus: Corpus, pairs: Sequence[LabeledPair],
                attribute: str) -> list[str]:
    return [corpus.patient(pair.patient_id).group(attribute) for pair in pairs]


def build_match_batch(
        corpus: Corpus,
        pairs: Sequence[LabeledPair],
        params: EncoderParams,
        attribute: str,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> MatchBatch:
    """
    Runs the encoders and predictor over a list of pairs.

    This function should:
    1. Encode each distinct patient and criterion once.
    2. Gather the rows back into pair order.
    3. Score every pair with the predictor.
    """
    patient_ids = sorted({pair.patient_id for pair in pairs})
    criterion_ids = sorted({pair.criterion_id for pair in pairs})
    patient_row = {pid: i for i, pid in enumerate(patient_ids)}
    criterion_row = {cid: i for i, cid in enumerate(criterion_ids)}

    z_patients = encode_patients(
        [corpus.patient(pid) for pid in patient_ids], params, precomputed
    )
    z_criteria = encode_criteria(
        [corpus.criterion(cid) for cid in criterion_ids], params, precomputed
    )
    z_p = P.gather_rows(z_patients, [patient_row[p.patient_id] for p in pairs])
    z_c = P.gather_rows(z_criteria,
                        [criterion_row[p.criterion_id] for p in pairs])

    return MatchBatch(
        logits=predict_logits(z_p, z_c, params),
        z_patients=z_p,
        z_criteria=z_c,
        labels=tuple(pair.label for pair in pairs),
        groups=tuple(pair_groups(corpus, pairs, attribute)),
    )


def batch_accuracy(batch: MatchBatch) -> float:
    """Share of pairs whose argmax logit is the true label."""
    predicted = np.argmax(batch.logits.data, axis=-1)
    truth = np.array([LABELS.index(label) for label in batch.labels])
    return float(np.mean(predicted == truth))


def evaluate_split(
        corpus: Corpus,
        params: EncoderParams,
        config: TrainConfig,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> tuple[LossBreakdown, float]:
    """Loss breakdown and accuracy of every pair in a split, as one batch."""
    batch = build_match_batch(corpus, corpus.pairs, params,
                              config.sensitive_attribute, precomputed)
    breakdown = total_loss(batch, config.effective_lambda, config.kappa)
    breakdown.graph = None
    return breakdown, batch_accuracy(batch)


def _weighted_breakdown(parts: list[tuple[LossBreakdown, int]]) -> LossBreakdown:
    """Pair-weighted mean of per-batch breakdowns."""
    count = sum(size for _, size in parts)
    first = parts[0][0]

    def mean_of(key: str) -> float:
        return sum(getattr(b, key) * size for b, size in parts) / count

    return LossBreakdown(
        l_ce=mean_of("l_ce"),
        l_cd=mean_of("l_cd"),
        l_fc=mean_of("l_fc"),
        total=mean_of("total"),
        lambda_fc=first.lambda_fc,
        kappa=first.kappa,
    )


def train(
        splits: dict[str, Corpus],
        config: TrainConfig,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> tuple[EncoderParams, TrainHistory]:
    """
    Trains the encoders and predictor.

    This function should:
    1. Validate the config and require non-empty train and valid splits.
    2. Build the vocabulary from the train split and initialise parameters.
    3. For every epoch, update on each minibatch of the total loss; in
    baseline-with-alc mode add the reversed adversary term and then update
    the adversary on the detached embeddings.
    4. Score the valid split after each epoch and keep a copy of the
    parameters with the lowest validation total.
    5. Stop once patience epochs pass without improvement.
    6. Raise DivergenceError naming the epoch and batch on a non-finite loss.
    """
    def check_for_errors():
        config.validate()
        for name in ("train", "valid"):
            if name not in splits or not splits[name].pairs:
                raise TrainConfigError(f"the {name} split has no pairs")

    check_for_errors()
    train_corpus, valid_corpus = splits["train"], splits["valid"]
    attribute = config.sensitive_attribute
    use_adversary = config.mode == "baseline-with-alc"

    params = init_encoder_params(build_vocabulary(train_corpus), config.dims,
                                 seed=config.seed)
    optimizer = make_optimizer(config)
    adversary = adversary_optimizer = None
    if use_adversary:
        adversary = init_adversary_params(attribute, config.output_dim,
                                          seed=config.seed + 1)
        adversary_optimizer = make_optimizer(config)

    pairs = list(train_corpus.pairs)
    groups = pair_groups(train_corpus, pairs, attribute)
    history = TrainHistory()
    best_params = params.copy()
    best_adversary = adversary.copy() if adversary else None
    best_total = math.inf
    epochs_without_improvement = 0

    logger.info(
        "Training %s on %d pairs (attribute %s, lambda %.3g, seed %d)",
        config.mode, len(pairs), attribute, config.effective_lambda,
        config.seed
    )
    for epoch in range(1, config.max_epochs + 1):
        parts = []
        adversary_parts = []
        for batch_number, indices in enumerate(
                make_batches(pairs, groups, config, epoch), start=1):
            batch = build_match_batch(train_corpus, [pairs[i] for i in indices],
                                      params, attribute, precomputed)
            breakdown = total_loss(batch, config.effective_lambda, config.kappa)
            objective = breakdown.graph
            if use_adversary:
                objective = P.add(objective, adversary_constraint(
                    batch.z_patients, batch.groups, adversary,
                    config.reversal_weight
                ))
            if not math.isfinite(objective.item()):
                logger.error("Loss diverged at epoch %d, batch %d",
                             epoch, batch_number)
                raise DivergenceError("non-finite loss", epoch, batch_number)

            try:
                optimizer.step(params, backward(objective, list(params)))
                if use_adversary:
                    own_loss = adversary_loss(batch.z_patients, batch.groups,
                                              adversary)
                    adversary_parts.append((own_loss.item(), len(batch)))
                    adversary_optimizer.step(
                        adversary, backward(own_loss, list(adversary))
                    )
            except DivergenceError as error:
                logger.error("Gradient diverged at epoch %d, batch %d",
                             epoch, batch_number)
                raise DivergenceError(str(error), epoch, batch_number) from error
            breakdown.graph = None
            parts.append((breakdown, len(batch)))

        valid_breakdown, valid_accuracy = evaluate_split(
            valid_corpus, params, config, precomputed
        )
        if not math.isfinite(valid_breakdown.total):
            raise DivergenceError("non-finite validation loss", epoch, 0)

        improved = valid_breakdown.total < best_total
        if improved:
            best_total = valid_breakdown.total
            best_params = params.copy()
            best_adversary = adversary.copy() if adversary else None
            history.best_epoch = epoch
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1

        adversary_mean = None
        if adversary_parts:
            adversary_mean = (sum(v * n for v, n in adversary_parts)
                              / sum(n for _, n in adversary_parts))
        record = EpochRecord(epoch, _weighted_breakdown(parts),
                             valid_breakdown, valid_accuracy, improved,
                             adversary_mean)
        history.epochs.append(record)
        logger.info(
            "Epoch %d: train %.5f, valid %.5f, valid accuracy %.4f%s",
            epoch, record.train.total, valid_breakdown.total, valid_accuracy,
            " (best)" if improved else ""
        )

        if epochs_without_improvement >= config.patience:
            break

    history.adversary = best_adversary
    logger.info("Best epoch %d of %d", history.best_epoch, len(history))
    return best_params, history
