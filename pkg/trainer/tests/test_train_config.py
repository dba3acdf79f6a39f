"""
Unit tests for trainer/train_config.py
"""
import json

import pytest
from trainer.train_config import TrainConfig, TrainConfigError


def test_defaults_are_valid():
    """
    Test the default configuration.

    This function tests the following:
    1. The defaults pass validation.
    2. fairpm mode uses lambda_fc; the baselines use 0.
    3. dims carries the encoder sizes.
    """
    config = TrainConfig()
    config.validate()  # Test 1.

    assert config.effective_lambda == 2.0  # Test 2.
    assert TrainConfig(mode="baseline").effective_lambda == 0.0
    assert TrainConfig(mode="baseline-with-alc").effective_lambda == 0.0

    assert config.dims.output_dim == 32  # Test 3.
    assert config.dims.highway_dim == 48


@pytest.mark.parametrize("changes", [
    {"learning_rate": 0.0},
    {"batch_size": 1},
    {"max_epochs": 0},
    {"patience": -1},
    {"lambda_fc": -1.0},
    {"kappa": 1.5},
    {"sensitive_attribute": "age"},
    {"optimizer": "momentum"},
    {"mode": "adversarial"},
    {"reversal_weight": -0.5},
    {"output_dim": 0},
])
def test_invalid_config_rejected(changes):
    with pytest.raises(TrainConfigError):
        TrainConfig(**changes).validate()


def test_single_item_batches_allowed_without_stratification():
    TrainConfig(batch_size=1, group_stratified=False).validate()


def test_unknown_keys_rejected():
    with pytest.raises(TrainConfigError):
        TrainConfig.from_dict({"seed": 1, "epochs": 3})


def test_json_round_trip_and_hash(tmp_path):
    """
    Test config files.

    This function tests the following:
    1. A config written as JSON loads back equal.
    2. Equal configs hash equally; a changed field changes the hash.
    """
    config = TrainConfig(seed=5, lambda_fc=4.0, sensitive_attribute="gender")
    path = tmp_path / "train.json"
    path.write_text(json.dumps(config.to_dict()), encoding="utf-8")

    loaded = TrainConfig.from_json_file(str(path))
    assert loaded == config  # Test 1.

    assert loaded.config_hash() == config.config_hash()  # Test 2.
    assert TrainConfig(seed=6).config_hash() != TrainConfig().config_hash()
