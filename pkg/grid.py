"""Uniform box grids for the cell-centred field code."""
from dataclasses import dataclass

import numpy as np

from errors import ValidationError


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian grid on ``[x_min, x_max]`` (x ``[y_min, y_max]`` in 2D).

    ``shape`` is ``(nx,)`` in 1D and ``(nx, ny)`` in 2D; axis 0 is x.
    """
    shape: tuple
    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.shape) not in (1, 2):
            raise ValidationError(f"grid must be 1D or 2D, got shape {self.shape}")
        if len(self.lower) != len(self.shape) or len(self.upper) != len(self.shape):
            raise ValidationError("grid extents must match the number of axes")
        for n in self.shape:
            if int(n) != n or n < 1:
                raise ValidationError(f"cell counts must be positive integers, got {self.shape}")
        for lo, hi in zip(self.lower, self.upper):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                raise ValidationError(f"degenerate extent [{lo}, {hi}]")

    @classmethod
    def uniform(cls, nx: int, ny: int = 1, x_range=(0.0, 1.0), y_range=(0.0, 1.0)) -> 'Grid':
        if ny > 1:
            return cls((int(nx), int(ny)), (float(x_range[0]), float(y_range[0])),
                       (float(x_range[1]), float(y_range[1])))
        return cls((int(nx),), (float(x_range[0]),), (float(x_range[1]),))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple:
        return tuple((hi - lo) / n for lo, hi, n in zip(self.lower, self.upper, self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def domain_volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in zip(self.lower, self.upper)]))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.lower[axis] + h * (np.arange(self.shape[axis]) + 0.5)

    def centers(self) -> tuple:
        """Cell-centre coordinate arrays, each of shape ``self.shape``."""
        axes = [self.axis_centers(a) for a in range(self.ndim)]
        return tuple(np.meshgrid(*axes, indexing='ij'))

    def check_shape(self, array: np.ndarray, name: str, leading: tuple = ()) -> None:
        expected = tuple(leading) + self.shape
        if np.shape(array) != expected:
            raise ValidationError(f"{name} has shape {np.shape(array)}, expected {expected}")
