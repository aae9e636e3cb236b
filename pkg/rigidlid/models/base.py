# Base models shared by every data model in the package
from pydantic import BaseModel as PydanticBaseModel
from pydantic import ConfigDict


class BaseModel(PydanticBaseModel):
    """Immutable value object; unknown keys are rejected."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class ArrayModel(PydanticBaseModel):
    """Immutable value object carrying numpy arrays."""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)
