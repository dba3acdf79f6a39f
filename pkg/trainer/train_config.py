"""
Training configuration.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

from corpus.corpus_models import SENSITIVE_ATTRIBUTES
from encoders.encoder_params import EncoderDims

OPTIMIZERS = ("plain-sgd", "adaptive-moment")
MODES = ("fairpm", "baseline", "baseline-with-alc")


class TrainConfigError(ValueError):
    """Raised for an invalid training configuration."""


@dataclass
class TrainConfig:
    """Hyper-parameters of one training run."""
    seed: int = 13
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    lambda_fc: float = 2.0
    kappa: float = 0.5
    sensitive_attribute: str = "race"
    optimizer: str = "adaptive-moment"
    mode: str = "fairpm"
    group_stratified: bool = True
    reversal_weight: float = 1.0
    embedding_dim: int = 32
    output_dim: int = 32
    conv_channels: int = 16

    @property
    def effective_lambda(self) -> float:
        """lambda_fc in fairpm mode; the baselines train without the constraint."""
        return self.lambda_fc if self.mode == "fairpm" else 0.0

    @property
    def dims(self) -> EncoderDims:
        return EncoderDims(
            embedding_dim=self.embedding_dim,
            output_dim=self.output_dim,
            conv_channels=self.conv_channels
        )

    def validate(self) -> None:
        """
        Checks every field.

        This function should:
        1. Require a positive learning rate and positive sizes.
        2. Require batch_size >= 2 when batches are group-stratified.
        3. Require lambda_fc >= 0, kappa in [0, 1] and reversal_weight >= 0.
        4. Require known attribute, optimizer and mode names.
        """
        def require(condition: bool, message: str) -> None:
            if not condition:
                raise TrainConfigError(message)

        require(self.learning_rate > 0, "learning_rate must be > 0")
        require(self.batch_size >= 1, "batch_size must be >= 1")
        require(not self.group_stratified or self.batch_size >= 2,
                "batch_size must be >= 2 with group-stratified batching")
        require(self.max_epochs >= 1, "max_epochs must be >= 1")
        require(self.patience >= 0, "patience must be >= 0")
        require(self.lambda_fc >= 0, "lambda_fc must be >= 0")
        require(0.0 <= self.kappa <= 1.0, "kappa must lie in [0, 1]")
        require(self.reversal_weight >= 0, "reversal_weight must be >= 0")
        require(self.sensitive_attribute in SENSITIVE_ATTRIBUTES,
                f"sensitive_attribute must be one of "
                f"{sorted(SENSITIVE_ATTRIBUTES)}")
        require(self.optimizer in OPTIMIZERS,
                f"optimizer must be one of {list(OPTIMIZERS)}")
        require(self.mode in MODES, f"mode must be one of {list(MODES)}")
        require(min(self.embedding_dim, self.output_dim,
                    self.conv_channels) >= 1,
                "embedding_dim, output_dim and conv_channels must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise TrainConfigError(f"Unknown train config keys: {unknown}")
        config = cls(**data)
        config.validate()
        return config

    @classmethod
    def from_json_file(cls, path: str) -> "TrainConfig":
        with open(path, mode="r", encoding="utf-8") as file:
            return cls.from_dict(json.load(file))

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
