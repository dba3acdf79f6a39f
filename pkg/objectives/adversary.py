"""
Adversarial baseline: a head that predicts the sensitive group from z_P.

The encoders see the adversary's loss through a gradient-reversal node, so
minimising the main objective pushes them to hide the group. The adversary
itself is trained separately on detached embeddings.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from corpus.corpus_models import SENSITIVE_ATTRIBUTES
from objectives.losses import LossInputError
from tensor_autodiff import primitives as P
from tensor_autodiff.tensor import Parameter, Tensor, constant, detach


@dataclass
class AdversaryParams:
    """Linear group classifier for one sensitive attribute."""
    attribute: str
    parameters: dict[str, Parameter] = field(default_factory=dict)

    @property
    def groups(self) -> tuple[str, ...]:
        return SENSITIVE_ATTRIBUTES[self.attribute]

    def __iter__(self):
        return iter(self.parameters.values())

    def __getitem__(self, name: str) -> Parameter:
        return self.parameters[name]

    def copy(self) -> "AdversaryParams":
        return AdversaryParams(
            self.attribute,
            {name: p.copy() for name, p in self.parameters.items()}
        )


def init_adversary_params(
        attribute: str,
        input_dim: int,
        seed: int = 0
) -> AdversaryParams:
    if attribute not in SENSITIVE_ATTRIBUTES:
        raise LossInputError(f"Unknown sensitive attribute: {attribute}")
    group_count = len(SENSITIVE_ATTRIBUTES[attribute])
    rng = np.random.default_rng(seed)
    scale = np.sqrt(2.0 / (input_dim + group_count))
    return AdversaryParams(attribute, {
        "adversary.w": Parameter(
            "adversary.w", rng.normal(scale=scale, size=(input_dim, group_count))
        ),
        "adversary.b": Parameter("adversary.b", np.zeros(group_count)),
    })


def _group_targets(groups: Sequence[str], params: AdversaryParams) -> np.ndarray:
    index = {group: i for i, group in enumerate(params.groups)}
    unknown = set(groups) - set(index)
    if unknown:
        raise LossInputError(
            f"groups {sorted(unknown)} are not values of {params.attribute}"
        )
    return np.eye(len(params.groups))[[index[g] for g in groups]]


def _group_cross_entropy(z, targets: np.ndarray, weight, bias) -> Tensor:
    logits = P.add(P.matmul(z, weight), bias)
    picked = P.reduce_sum(
        P.multiply(P.log_softmax(logits, axis=-1), constant(targets)), axis=-1
    )
    return P.scale(P.mean(picked), -1.0)


def adversary_constraint(
        z_patients: Tensor,
        groups: Sequence[str],
        params: AdversaryParams,
        reversal_weight: float = 1.0
) -> Tensor:
    """
    The adversary's loss as seen by the encoders.

    The forward value is the adversary's mean cross-entropy. Gradients
    reaching z_patients are multiplied by -reversal_weight; the adversary's
    own parameters enter as constants so this term never updates them.
    """
    targets = _group_targets(groups, params)
    reversed_z = P.reverse_gradient(z_patients, reversal_weight)
    return _group_cross_entropy(
        reversed_z, targets,
        constant(params["adversary.w"].value),
        constant(params["adversary.b"].value)
    )


def adversary_loss(
        z_patients: Tensor,
        groups: Sequence[str],
        params: AdversaryParams
) -> Tensor:
    """The adversary's own objective on detached embeddings."""
    targets = _group_targets(groups, params)
    return _group_cross_entropy(
        detach(z_patients), targets,
        params["adversary.w"].leaf(), params["adversary.b"].leaf()
    )
