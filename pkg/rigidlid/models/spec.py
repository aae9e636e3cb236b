from enum import Enum
from typing import Any, Dict, Literal

from pydantic import Field, model_validator

from ..errors import InadmissibleParametersError
from .base import BaseModel


class ModelKind(str, Enum):
    CLASSICAL = "classical"
    ABCD = "abcd"
    GREEN_NAGHDI = "green_naghdi"


class AbcdParams(BaseModel):
    """Coefficients of an abcd-Boussinesq system."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 1.0 / 3.0

    @classmethod
    def classical(cls) -> "AbcdParams":
        return cls(a=0.0, b=0.0, c=0.0, d=1.0 / 3.0)

    @property
    def coefficients(self):
        return (self.a, self.b, self.c, self.d)

    @property
    def admissible(self) -> bool:
        return self.b >= 0 and self.d >= 0 and self.a <= 0 and self.c <= 0

    @property
    def total(self) -> float:
        return self.a + self.b + self.c + self.d

    @property
    def pair_product(self) -> float:
        a, b, c, d = self.coefficients
        return (a + b) * (a + d) * (c + b) * (c + d)

    @property
    def nondegenerate(self) -> bool:
        return self.pair_product**2 + self.total**2 > 0

    @property
    def is_classical(self) -> bool:
        return self.coefficients == AbcdParams.classical().coefficients

    def require_admissible(self) -> "AbcdParams":
        if not self.admissible:
            raise InadmissibleParametersError(
                f"abcd = {self.coefficients} violates b >= 0, d >= 0, a <= 0, c <= 0"
            )
        return self


class ModelSpec(BaseModel):
    """
    Which system is simulated and with which parameters.

    ``kind`` picks the system, ``dim`` the dimension. Classical and
    Green-Naghdi systems always use the classical linear part
    (a, b, c, d) = (0, 0, 0, 1/3).
    """

    kind: ModelKind = ModelKind.CLASSICAL
    dim: Literal[1, 2] = 1
    eps: float = Field(0.1, gt=0.0, le=1.0)
    mu: float = Field(1.0, gt=0.0, le=1.0)
    abcd: AbcdParams = Field(default_factory=AbcdParams.classical)
    h0: float = Field(0.5, ge=0.0)

    @model_validator(mode="after")
    def _consistent(self) -> "ModelSpec":
        self.abcd.require_admissible()
        if self.kind != ModelKind.ABCD and not self.abcd.is_classical:
            raise ValueError(f"{self.kind.value} systems use the classical abcd = (0, 0, 0, 1/3)")
        if self.kind == ModelKind.GREEN_NAGHDI and not self.h0 > 0:
            raise ValueError("Green-Naghdi needs a strictly positive depth floor h0")
        return self

    @property
    def is_green_naghdi(self) -> bool:
        return self.kind == ModelKind.GREEN_NAGHDI

    @property
    def label(self) -> str:
        return f"{self.kind.value}{self.dim}d"

    def to_record(self) -> Dict[str, Any]:
        """Flat key-value record used in config files and CSV rows."""
        return {
            "kind": self.kind.value,
            "dim": self.dim,
            "eps": self.eps,
            "mu": self.mu,
            "a": self.abcd.a,
            "b": self.abcd.b,
            "c": self.abcd.c,
            "d": self.abcd.d,
            "h0": self.h0,
        }

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "ModelSpec":
        data = dict(record)
        abcd = {k: data.pop(k) for k in ("a", "b", "c", "d") if k in data}
        if abcd:
            data["abcd"] = AbcdParams(**abcd)
        return cls(**data)

    def with_parameters(self, eps: float, mu: float) -> "ModelSpec":
        return ModelSpec(**{**self.model_dump(), "eps": eps, "mu": mu})
