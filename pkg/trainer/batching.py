"""
Seeded minibatch construction.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from trainer.train_config import TrainConfig


def make_batches(
        pairs: Sequence,
        groups: Sequence[str],
        config: TrainConfig,
        epoch: int = 0
) -> list[list[int]]:
    """
    Splits pair indices into minibatches for one epoch.

    This function should:
    1. Seed a generator from (seed, epoch) so every epoch reshuffles the same
    way across runs.
    2. Without stratification, shuffle and cut into batch_size chunks.
    3. With stratification, shuffle each group, lay the groups end to end
    and deal the items to batches in turn, so a group with at least as many
    members as there are batches reaches every batch.
    4. Top up a batch that still misses a group by repeating one of that
    group's members, when batch_size covers the group count.
    """
    count = len(pairs)
    if count == 0:
        raise ValueError("cannot batch an empty pair list")
    if len(groups) != count:
        raise ValueError("groups must list one group per pair")

    rng = np.random.default_rng([config.seed, epoch])
    batch_count = math.ceil(count / config.batch_size)

    if not config.group_stratified:
        order = rng.permutation(count).tolist()
        return [order[start:start + config.batch_size]
                for start in range(0, count, config.batch_size)]

    members = {}
    for index, group in enumerate(groups):
        members.setdefault(group, []).append(index)
    shuffled = {
        group: [members[group][i] for i in rng.permutation(len(members[group]))]
        for group in sorted(members)
    }
    dealt = [index for group in sorted(shuffled) for index in shuffled[group]]

    batches = [[] for _ in range(batch_count)]
    for position, index in enumerate(dealt):
        batches[position % batch_count].append(index)

    if config.batch_size >= len(shuffled):
        for batch_index, batch in enumerate(batches):
            present = {groups[i] for i in batch}
            for group in sorted(shuffled):
                if group not in present:
                    pool = shuffled[group]
                    batch.append(pool[batch_index % len(pool)])
    return batches
