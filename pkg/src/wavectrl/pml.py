"""Absorbing-layer damping profiles.

Two flavors: a fixed cubic ramp for the 2D environment boundaries, and a
trainable nonnegative profile for the latent grid (softplus of linearly
interpolated raw parameters, so gradients never vanish).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grid import Field, Grid1D
from .mathutils import sigmoid, softplus


@dataclass(frozen=True)
class PmlProfile1D:
    """Fixed damping profile along one axis; zero outside the boundary layer."""

    grid: Grid1D
    sigma: np.ndarray
    thickness_cells: int
    scale: float


def zero_profile(grid: Grid1D) -> PmlProfile1D:
    """Degenerate profile with no damping (reflecting boundaries)."""
    return PmlProfile1D(grid, np.zeros(grid.n_cells), 0, 0.0)


def build_ramp(grid: Grid1D, thickness_cells: int, scale: float) -> PmlProfile1D:
    """Cubic damping ramp, symmetric at both ends of the grid.

    A cell at depth d (in cells) from the nearer boundary gets
    ``scale * ((thickness - d) / thickness)**3`` while d < thickness, and 0
    deeper inside. The normalized ramp hits exactly 1 at the outermost cell.
    """
    n = grid.n_cells
    if not 0 < thickness_cells < n / 2:
        raise ParameterError(
            f"pml thickness {thickness_cells} outside (0, {n / 2:g}) for {n} cells"
        )
    if scale <= 0:
        raise ParameterError(f"pml scale must be positive, got {scale}")
    depth = np.minimum(np.arange(n), np.arange(n)[::-1]).astype(np.float64)
    ramp = np.clip((thickness_cells - depth) / thickness_cells, 0.0, 1.0) ** 3
    return PmlProfile1D(grid, scale * ramp, thickness_cells, scale)


@dataclass
class LatentPmlParams:
    """Trainable latent damping parameterization.

    ``raw`` holds P unconstrained values at equally spaced positions across
    the grid; the realized profile is ``scale * softplus(lerp(raw))``.
    """

    raw: np.ndarray
    grid: Grid1D
    scale: float = 1.0
    _interp: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.raw.ndim != 1 or self.raw.size < 1:
            raise ParameterError("latent pml raw parameters must be a nonempty vector")
        if self.scale <= 0:
            raise ParameterError(f"latent pml scale must be positive, got {self.scale}")
        self._interp = interp_matrix(self.raw.size, self.grid.n_cells)


def interp_matrix(n_params: int, n_cells: int) -> np.ndarray:
    """(n_cells, n_params) linear-interpolation weights; rows sum to 1."""
    w = np.zeros((n_cells, n_params))
    if n_params == 1:
        w[:, 0] = 1.0
        return w
    pos = np.linspace(0.0, n_params - 1.0, n_cells)
    lo = np.minimum(np.floor(pos).astype(int), n_params - 2)
    frac = pos - lo
    w[np.arange(n_cells), lo] = 1.0 - frac
    w[np.arange(n_cells), lo + 1] = frac
    return w


def realize_latent_pml(params: LatentPmlParams) -> Field:
    """Realized nonnegative latent damping profile on the latent grid."""
    z = params._interp @ params.raw
    return Field(params.grid, params.scale * softplus(z))


def realize_latent_pml_vjp(params: LatentPmlParams, grad_sigma: np.ndarray) -> np.ndarray:
    """Gradient of ``sum(grad_sigma * realized)`` with respect to ``raw``."""
    z = params._interp @ params.raw
    return params._interp.T @ (params.scale * sigmoid(z) * grad_sigma)
