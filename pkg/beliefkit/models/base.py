"""This file defines the custom BaseModel object used by the package.

It allows numpy arrays as fields and has a convenience method for converting to
plain JSON-compatible dictionaries.
"""
import json
from typing import Annotated

import numpy as np
from pydantic import BaseModel as BaseModelPydantic
from pydantic import ConfigDict, PlainSerializer, PlainValidator


def _as_float_array(value) -> np.ndarray:
    return np.asarray(value, dtype=float)


def _as_bool_array(value) -> np.ndarray:
    return np.asarray(value, dtype=bool)


def _as_int_array(value) -> np.ndarray:
    return np.asarray(value, dtype=int)


def _as_list(array: np.ndarray) -> list:
    return np.asarray(array).tolist()


FloatArray = Annotated[
    np.ndarray,
    PlainValidator(_as_float_array),
    PlainSerializer(_as_list, return_type=list, when_used="json"),
]
BoolArray = Annotated[
    np.ndarray,
    PlainValidator(_as_bool_array),
    PlainSerializer(_as_list, return_type=list, when_used="json"),
]
IntArray = Annotated[
    np.ndarray,
    PlainValidator(_as_int_array),
    PlainSerializer(_as_list, return_type=list, when_used="json"),
]


class BaseModel(BaseModelPydantic):
    """The BaseModel class defines the base model for all models in the package."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def model_dump(self, **kwargs):
        """Dump the model to a dictionary of JSON-compatible values.

        Returns:
            Dict[str, Any]: The model as a dictionary.
        """
        json_data = self.model_dump_json(**kwargs)
        data = json.loads(json_data)
        return data


class ConfigModel(BaseModel):
    """Base class for configuration blocks; unknown keys are rejected."""

    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid")
