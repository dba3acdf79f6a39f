"""
Checkpoint and history files.

A checkpoint is one JSON object: the config and its hash, the seed, the best
epoch, the vocabulary with its hash, every parameter as (name, shape,
row-major values) and, for adversarial runs, the adversary's parameters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Optional

import numpy as np

from corpus.corpus_io import write_text_atomic
from encoders.encoder_params import EncoderDims, EncoderInputError, EncoderParams
from encoders.vocabulary import Vocabulary
from objectives.adversary import AdversaryParams
from tensor_autodiff.tensor import Parameter
from trainer.train_config import TrainConfig, TrainConfigError
from trainer.training import TrainHistory

CHECKPOINT_FORMAT = "fairmatch-checkpoint"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for a checkpoint file that cannot be read back."""
    def __init__(self, path, detail: str):
        self.path = str(path)
        super().__init__(f"{path}: {detail}")


@dataclass
class Checkpoint:
    params: EncoderParams
    config: TrainConfig
    best_epoch: int
    adversary: Optional[AdversaryParams] = None


def _parameter_records(parameters) -> list[dict]:
    return [
        {
            "name": parameter.name,
            "shape": list(parameter.shape),
            "values": parameter.value.ravel().tolist(),
        }
        for parameter in parameters
    ]


def _parameters_from_records(records: list[dict]) -> dict[str, Parameter]:
    parameters = {}
    for record in records:
        shape = tuple(record["shape"])
        values = np.asarray(record["values"], dtype=np.float64)
        if values.size != int(np.prod(shape, dtype=int)):
            raise ValueError(
                f"parameter {record['name']} has {values.size} values for "
                f"shape {shape}"
            )
        parameters[record["name"]] = Parameter(record["name"],
                                               values.reshape(shape))
    return parameters


def dumps_checkpoint(params: EncoderParams, config: TrainConfig,
                     history: Optional[TrainHistory] = None) -> str:
    adversary = history.adversary if history is not None else None
    data = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": config.seed,
        "config": config.to_dict(),
        "config-hash": config.config_hash(),
        "best-epoch": history.best_epoch if history is not None else 0,
        "dims": params.dims.to_dict(),
        "vocabulary": {
            "tokens": list(params.vocabulary.tokens),
            "hash": params.vocabulary.vocabulary_hash(),
        },
        "parameters": _parameter_records(params),
        "adversary": None if adversary is None else {
            "attribute": adversary.attribute,
            "parameters": _parameter_records(adversary),
        },
    }
    return json.dumps(data) + "\n"


def save_checkpoint(path: PathLike, params: EncoderParams, config: TrainConfig,
                    history: Optional[TrainHistory] = None) -> None:
    write_text_atomic(path, dumps_checkpoint(params, config, history))


def load_checkpoint(path: PathLike) -> Checkpoint:
    """
    Reads a checkpoint back.

    This function should:
    1. Raise FileNotFoundError naming a missing path.
    2. Check the format marker and the vocabulary hash.
    3. Rebuild the config, the parameters and the optional adversary.
    4. Check every parameter shape against the stored dims.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise CheckpointError(path, f"not valid JSON ({error.msg})") from error
    if not isinstance(data, dict) or data.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(path, "not a checkpoint file")

    try:
        vocabulary = Vocabulary(tuple(data["vocabulary"]["tokens"]))
        if vocabulary.vocabulary_hash() != data["vocabulary"]["hash"]:
            raise CheckpointError(path, "vocabulary hash does not match tokens")
        params = EncoderParams(
            vocabulary, EncoderDims.from_dict(data["dims"]),
            _parameters_from_records(data["parameters"])
        )
        params.check_shapes()
        config = TrainConfig.from_dict(data["config"])
        adversary = None
        if data.get("adversary") is not None:
            adversary = AdversaryParams(
                data["adversary"]["attribute"],
                _parameters_from_records(data["adversary"]["parameters"])
            )
        best_epoch = int(data["best-epoch"])
    except KeyError as error:
        raise CheckpointError(path, f"missing field {error.args[0]}") from error
    except (TypeError, ValueError, EncoderInputError, TrainConfigError) as error:
        if isinstance(error, CheckpointError):
            raise
        raise CheckpointError(path, str(error)) from error
    return Checkpoint(params, config, best_epoch, adversary)


def save_history(path: PathLike, history: TrainHistory) -> None:
    write_text_atomic(path, json.dumps(history.to_dict(), indent=2) + "\n")


def load_history(path: PathLike) -> TrainHistory:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"history not found: {path}")
    return TrainHistory.from_dict(json.loads(path.read_text(encoding="utf-8")))
