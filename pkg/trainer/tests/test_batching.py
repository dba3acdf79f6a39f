"""
Unit tests for trainer/batching.py
"""
import pytest
from trainer.batching import make_batches
from trainer.train_config import TrainConfig

# FIXTURES #


@pytest.fixture
def pairs():
    return list(range(20))


@pytest.fixture
def groups():
    """Seven white and thirteen others."""
    return ["white"] * 7 + ["others"] * 13


# TESTS #


def test_large_batch_size_gives_one_batch(pairs, groups):
    config = TrainConfig(batch_size=64)
    batches = make_batches(pairs, groups, config, epoch=1)

    assert len(batches) == 1
    assert sorted(batches[0]) == pairs


def test_stratified_batches_hold_every_group(pairs, groups):
    """
    Test stratified batching with batch size 4.

    This function tests the following:
    1. There are ceil(20 / 4) batches.
    2. Every batch holds both groups.
    3. Every pair appears at least once.
    """
    config = TrainConfig(batch_size=4)
    batches = make_batches(pairs, groups, config, epoch=1)

    assert len(batches) == 5  # Test 1.
    for batch in batches:
        assert {groups[i] for i in batch} == {"white", "others"}  # Test 2.
    assert {i for batch in batches for i in batch} == set(pairs)  # Test 3.


def test_small_group_is_repeated():
    """Test that a group with fewer members than batches still reaches each batch."""
    pairs = list(range(12))
    groups = ["white"] * 2 + ["others"] * 10
    config = TrainConfig(batch_size=3)

    batches = make_batches(pairs, groups, config, epoch=0)

    assert len(batches) == 4
    for batch in batches:
        assert any(groups[i] == "white" for i in batch)
        assert any(groups[i] == "others" for i in batch)


def test_unstratified_batches_partition_pairs(pairs, groups):
    config = TrainConfig(batch_size=6, group_stratified=False)
    batches = make_batches(pairs, groups, config, epoch=2)

    assert [len(batch) for batch in batches] == [6, 6, 6, 2]
    assert sorted(i for batch in batches for i in batch) == pairs


def test_batches_are_seeded(pairs, groups):
    """
    Test batch order reproducibility.

    This function tests the following:
    1. The same seed and epoch give the same batches.
    2. Another epoch reshuffles.
    3. Another seed reshuffles.
    """
    config = TrainConfig(batch_size=4)
    first = make_batches(pairs, groups, config, epoch=3)

    assert make_batches(pairs, groups, config, epoch=3) == first  # Test 1.
    assert make_batches(pairs, groups, config, epoch=4) != first  # Test 2.
    assert make_batches(pairs, groups, TrainConfig(batch_size=4, seed=99),
                        epoch=3) != first  # Test 3.


def test_empty_pairs_rejected():
    with pytest.raises(ValueError):
        make_batches([], [], TrainConfig())
