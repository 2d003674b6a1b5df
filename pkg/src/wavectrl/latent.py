"""1D latent wave surrogate: total and incident pairs on a shared grid.

The latent state carries two coupled split-field wave systems. The total
pair propagates at a learned, time-varying speed c_z(x, t); the incident
pair at the constant ambient speed. Both share a learned oscillating source
and a learned nonnegative damping profile. The predicted scattered energy is
the integral of (u_tot - u_inc)^2 at every integration step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BlowUpError, DimensionError, ParameterError
from .grid import Field, Grid1D
from .kernels import get_backend, numpy_backend

TWO_PI = 2.0 * np.pi


@dataclass
class LatentState:
    """Four latent fields stacked as ``y`` with shape (4, n_cells).

    Order: [u_tot, v_tot, u_inc, v_inc].
    """

    grid: Grid1D
    y: np.ndarray
    t: float = 0.0

    FIELD_NAMES = ("u_tot", "v_tot", "u_inc", "v_inc")

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.y.shape != (4, self.grid.n_cells):
            raise DimensionError(
                f"latent state shape {self.y.shape}, expected (4, {self.grid.n_cells})"
            )

    @classmethod
    def zeros(cls, grid: Grid1D, t: float = 0.0) -> "LatentState":
        return cls(grid, np.zeros((4, grid.n_cells)), t)

    def _field(self, i: int) -> Field:
        return Field(self.grid, self.y[i])

    @property
    def u_tot(self) -> Field:
        return self._field(0)

    @property
    def v_tot(self) -> Field:
        return self._field(1)

    @property
    def u_inc(self) -> Field:
        return self._field(2)

    @property
    def v_inc(self) -> Field:
        return self._field(3)

    def check_finite(self, t: float | None = None) -> None:
        for i, name in enumerate(self.FIELD_NAMES):
            if not np.isfinite(self.y[i]).all():
                raise BlowUpError(name, self.t if t is None else t)

    def copy(self) -> "LatentState":
        return LatentState(self.grid, self.y.copy(), self.t)


@dataclass
class LatentConditions:
    """Everything the wave encoder provides: initial state, source, damping."""

    initial: LatentState
    f_z: Field
    sigma_z: Field
    omega: float

    def __post_init__(self):
        if self.f_z.grid != self.initial.grid or self.sigma_z.grid != self.initial.grid:
            raise DimensionError("latent conditions must share the latent grid")
        if self.sigma_z.values.min() < 0:
            raise ParameterError("latent damping profile must be nonnegative")
        if self.omega <= 0:
            raise ParameterError("latent source frequency must be positive")


@dataclass
class LatentSpeedInterp:
    """Piecewise-linear-in-time latent speed: one frame per design knot."""

    c_frames: np.ndarray  # (K, n_cells)
    t_knots: np.ndarray  # (K,), strictly increasing
    grid: Grid1D

    def __post_init__(self):
        self.c_frames = np.ascontiguousarray(self.c_frames, dtype=np.float64)
        self.t_knots = np.asarray(self.t_knots, dtype=np.float64).ravel()
        if self.c_frames.ndim != 2 or self.c_frames.shape[0] != self.t_knots.size:
            raise DimensionError(
                f"{self.c_frames.shape[0]} speed frames vs {self.t_knots.size} knots"
            )
        if self.c_frames.shape[1] != self.grid.n_cells:
            raise DimensionError("speed frames must match the latent grid")
        if self.t_knots.size < 2 or np.any(np.diff(self.t_knots) <= 0):
            raise ParameterError("need >= 2 strictly increasing time knots")
        if self.c_frames.min() <= 0:
            raise ParameterError("latent speed frames must be positive everywhere")

    def at(self, t: float) -> np.ndarray:
        k = self.t_knots
        if t < k[0] - 1e-9 * (k[-1] - k[0]) or t > k[-1] + 1e-9 * (k[-1] - k[0]):
            raise ParameterError(f"t={t} outside speed knots [{k[0]}, {k[-1]}]")
        t = min(max(t, k[0]), k[-1])
        j = min(int(np.searchsorted(k, t, side="right")) - 1, k.size - 2)
        j = max(j, 0)
        a = (t - k[j]) / (k[j + 1] - k[j])
        return (1.0 - a) * self.c_frames[j] + a * self.c_frames[j + 1]


@lru_cache(maxsize=16)
def embed_matrix(grid: Grid1D, n_coeffs: int) -> np.ndarray:
    """(n_cells, n_coeffs) sine basis over xi = x + L/2 in [0, L].

    Column n-1 holds sin(n pi xi / L); both endpoint rows are forced to
    exactly zero so embedded fields always pin at the boundaries.
    """
    if n_coeffs < 1:
        raise ParameterError("need at least one embedding coefficient")
    xi = grid.coords() + 0.5 * grid.length
    n = np.arange(1, n_coeffs + 1)
    b = np.sin(np.pi * np.outer(xi, n) / grid.length)
    b[0, :] = 0.0
    b[-1, :] = 0.0
    return b


def sinusoidal_embed(coeffs: np.ndarray, grid: Grid1D) -> Field:
    """Field value at cell i is sum_n coeffs[n-1] * sin(n pi xi_i / L)."""
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    return Field(grid, embed_matrix(grid, coeffs.size) @ coeffs)


def latent_rhs(
    state: LatentState,
    c_z: Field,
    f_z: Field,
    sigma_z: Field,
    omega: float,
    t: float,
    c_ambient: float,
) -> LatentState:
    """Time derivative of the four latent fields.

    u_tot' = c_z^2 dx(v_tot) - sigma_z u_tot
    v_tot' = dx(u_tot + f_z sin(2 pi omega t)) - sigma_z v_tot
    u_inc' = c_amb^2 dx(v_inc) - sigma_z u_inc
    v_inc' = dx(u_inc + f_z sin(2 pi omega t)) - sigma_z v_inc

    The incident pair always propagates at the constant ambient speed.
    """
    state.check_finite(t)
    grid = state.grid
    if c_z.grid != grid or f_z.grid != grid or sigma_z.grid != grid:
        raise DimensionError("latent rhs requires all fields on the latent grid")
    out = np.empty((4, 1, grid.n_cells))
    numpy_backend._latent_rhs(
        state.y[:, None, :],
        (c_z.values**2)[None, :],
        c_ambient**2,
        sigma_z.values[None, :],
        _dfdx_row(f_z),
        float(np.sin(TWO_PI * omega * t)),
        1.0 / (2.0 * grid.dx),
        out,
    )
    return LatentState(grid, out[:, 0, :], state.t)


def rollout(
    conds: LatentConditions,
    speed: LatentSpeedInterp,
    horizon_actions: int,
    steps_per_action: int,
    dt: float,
    c_ambient: float,
    record_fields: bool = False,
):
    """Integrate the latent pair over ``horizon_actions`` windows.

    Returns ``(states, sigma_hat, fields)``: the latent state at every action
    boundary (horizon+1 entries), the three energy series stacked as
    (3, horizon*steps) in the order [scattered, total, incident], and, when
    ``record_fields`` is set, the scattered field u_tot - u_inc at every step
    as (horizon*steps + 1, n_cells) including the initial state.
    """
    if horizon_actions < 1 or steps_per_action < 1:
        raise ParameterError("horizon and steps per action must be >= 1")
    backend = get_backend()
    grid = conds.initial.grid
    n = grid.n_cells
    state = conds.initial
    state.check_finite()
    y = state.y[:, None, :].copy()  # (4, 1, n)
    dfdx = _dfdx_row(conds.f_z)
    sigma = np.ascontiguousarray(conds.sigma_z.values[None, :])
    t0 = state.t
    spa = steps_per_action
    sig = np.empty((3, 1, horizon_actions * spa))
    states = [state.copy()]
    fields = None
    store = None
    if record_fields:
        fields = np.empty((horizon_actions * spa + 1, n))
        fields[0] = y[0, 0] - y[2, 0]
        store = np.empty((spa + 1, 4, 1, n))
    for k in range(horizon_actions):
        ta = t0 + k * spa * dt
        tb = t0 + (k + 1) * spa * dt
        c0 = np.ascontiguousarray(speed.at(ta)[None, :])
        c1 = np.ascontiguousarray(speed.at(tb)[None, :])
        backend.latent_window_forward(
            y, c0, c1, c_ambient**2, sigma, dfdx, conds.omega,
            np.array([ta]), dt, spa, grid.dx, sig[:, :, k * spa : (k + 1) * spa], store,
        )
        if not np.isfinite(sig[:, :, (k + 1) * spa - 1]).all():
            raise BlowUpError("u_tot", tb)
        if record_fields:
            fields[k * spa + 1 : (k + 1) * spa + 1] = store[1:, 0, 0] - store[1:, 2, 0]
        states.append(LatentState(grid, y[:, 0, :].copy(), tb))
    states[-1].check_finite()
    return states, sig[:, 0, :], fields


def _dfdx_row(f_z: Field) -> np.ndarray:
    """Spatial derivative of the latent source shape, as a (1, n) row.

    Uses the wall-closed gradient because the source term rides inside the
    velocity update.
    """
    out = np.empty((1, f_z.grid.n_cells))
    numpy_backend._gradx(f_z.values[None, :], 1.0 / (2.0 * f_z.grid.dx), out)
    return out
