"""
Learned parameters of the patient encoder, criterion encoder and predictor.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional

import numpy as np

from encoders.vocabulary import Vocabulary
from tensor_autodiff.tensor import Parameter, Tensor

CLASS_COUNT = 3


class EncoderInputError(ValueError):
    """Raised for encoder inputs that cannot be embedded."""


@dataclass(frozen=True)
class EncoderDims:
    """Sizes of the encoders; patient and criterion embeddings share output_dim."""
    embedding_dim: int = 32
    output_dim: int = 32
    conv_channels: int = 16
    conv_widths: tuple[int, ...] = (1, 2, 3)

    @property
    def highway_dim(self) -> int:
        return self.conv_channels * len(self.conv_widths)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["conv_widths"] = list(self.conv_widths)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderDims":
        values = dict(data)
        if "conv_widths" in values:
            values["conv_widths"] = tuple(values["conv_widths"])
        return cls(**values)


def parameter_shapes(dims: EncoderDims, vocabulary_size: int) -> dict[str, tuple]:
    """Returns every parameter name with its shape, in a fixed order."""
    d, d_z, h = dims.embedding_dim, dims.output_dim, dims.highway_dim
    shapes = {
        "embedding": (vocabulary_size, d),
        "memory.query": (d,),
        "memory.key": (d, d),
        "memory.value": (d, d_z),
    }
    for width in dims.conv_widths:
        shapes[f"conv.w{width}"] = (width, d, dims.conv_channels)
        shapes[f"conv.b{width}"] = (dims.conv_channels,)
    shapes.update({
        "highway.gate.w": (h, h),
        "highway.gate.b": (h,),
        "highway.transform.w": (h, h),
        "highway.transform.b": (h,),
        "criterion.projection.w": (h, d_z),
        "criterion.projection.b": (d_z,),
        "predictor.w": (4 * d_z, CLASS_COUNT),
        "predictor.b": (CLASS_COUNT,),
    })
    return shapes


@dataclass
class EncoderParams:
    """
    Every learned tensor of the matching model plus the vocabulary.

    Parameters are kept in a name-ordered dict; names are unique.
    """
    vocabulary: Vocabulary
    dims: EncoderDims
    parameters: dict[str, Parameter] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Parameter:
        return self.parameters[name]

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self.parameters.values())

    def leaf(self, name: str) -> Tensor:
        return self.parameters[name].leaf()

    def values(self) -> dict[str, np.ndarray]:
        return {name: p.value for name, p in self.parameters.items()}

    def copy(self) -> "EncoderParams":
        """Returns a copy whose later updates do not affect this one."""
        return EncoderParams(
            self.vocabulary, self.dims,
            {name: p.copy() for name, p in self.parameters.items()}
        )

    def check_shapes(self) -> None:
        """Raises EncoderInputError if any shape disagrees with dims."""
        expected = parameter_shapes(self.dims, len(self.vocabulary))
        if list(expected) != list(self.parameters):
            raise EncoderInputError(
                f"parameter names {sorted(self.parameters)} do not match "
                f"the encoder layout"
            )
        for name, shape in expected.items():
            if self.parameters[name].shape != shape:
                raise EncoderInputError(
                    f"parameter {name} has shape "
                    f"{self.parameters[name].shape}, expected {shape}"
                )


def init_encoder_params(
        vocabulary: Vocabulary,
        dims: Optional[EncoderDims] = None,
        seed: int = 0
) -> EncoderParams:
    """
    Creates freshly initialised parameters.

    This function should:
    1. Draw matrices with a scaled normal (Glorot-style fan average).
    2. Start biases at zero, except the highway gate bias at -1 so the
    layer begins close to passing its input through.
    3. Zero the <pad> embedding row.
    """
    dims = dims or EncoderDims()
    rng = np.random.default_rng(seed)
    parameters = {}

    for name, shape in parameter_shapes(dims, len(vocabulary)).items():
        if name.endswith(".b") or name.startswith("conv.b"):
            value = np.zeros(shape)
        elif len(shape) == 1:
            value = rng.normal(scale=1.0 / np.sqrt(shape[0]), size=shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            fan_out = shape[-1]
            value = rng.normal(
                scale=np.sqrt(2.0 / (fan_in + fan_out)), size=shape
            )
        parameters[name] = Parameter(name, value)

    parameters["highway.gate.b"].value = np.full(dims.highway_dim, -1.0)
    embedding = np.array(parameters["embedding"].value)
    embedding[0] = 0.0
    parameters["embedding"].value = embedding
    return EncoderParams(vocabulary, dims, parameters)
