from typing import Optional

import numpy as np
from pydantic import model_validator

from ..errors import GridMismatchError
from ..spectra import Grid, SpectralField, backward, enforce_symmetry
from .base import ArrayModel


class State(ArrayModel):
    """
    Unknowns (zeta, V) of one model at one time, stored spectrally.

    In 1D ``velocity`` is a scalar field; in 2D it is a vector field with the
    component index first.
    """

    t: float = 0.0
    zeta: SpectralField
    velocity: SpectralField

    @model_validator(mode="after")
    def _same_grid(self) -> "State":
        if self.zeta.grid != self.velocity.grid:
            raise GridMismatchError("zeta and velocity live on different grids")
        if self.zeta.is_vector:
            raise GridMismatchError("zeta must be a scalar field")
        if self.velocity.is_vector != (self.grid.dim == 2):
            raise GridMismatchError("velocity must be scalar in 1D and a vector in 2D")
        return self

    @property
    def grid(self) -> Grid:
        return self.zeta.grid

    def pack(self) -> np.ndarray:
        """Stack as ``(1 + dim, *grid.shape)``: zeta first, then velocity components."""
        v = self.velocity.coefficients
        if not self.velocity.is_vector:
            v = v[np.newaxis]
        return np.concatenate([self.zeta.coefficients[np.newaxis], v])

    @classmethod
    def unpack(cls, u: np.ndarray, grid: Grid, t: float = 0.0, symmetrize: bool = False) -> "State":
        if symmetrize:
            u = enforce_symmetry(u, grid)
        velocity = u[1] if grid.dim == 1 else u[1:]
        return cls(
            t=float(t),
            zeta=SpectralField(grid=grid, coefficients=u[0]),
            velocity=SpectralField(grid=grid, coefficients=velocity),
        )

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "State":
        return cls.unpack(np.zeros((1 + grid.dim,) + grid.shape, dtype=complex), grid, t)

    def physical(self) -> np.ndarray:
        """Real samples of (zeta, V) with shape ``(1 + dim, *grid.shape)``."""
        return backward(self.pack(), self.grid)

    def min_depth(self, eps: float) -> float:
        """min over the grid of 1 + eps*zeta."""
        return float(1.0 + eps * np.min(backward(self.zeta.coefficients, self.grid)))

    def satisfies_depth_floor(self, eps: float, h0: float, margin: Optional[float] = 0.0) -> bool:
        return self.min_depth(eps) >= h0 + (margin or 0.0)
