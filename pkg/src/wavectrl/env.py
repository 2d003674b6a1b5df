"""2D free-field acoustic environment with actuated cylindrical scatterers.

The state is the six-field split form w = [u, v_x, v_y, psi_x, psi_y, gamma]
of the damped second-order wave equation; boundary damping profiles sigma_x,
sigma_y absorb outgoing waves so the finite grid behaves like open space.
An oscillating spatial source injects energy; disk scatterers of contrasting
sound speed reflect it. Each episode runs two simulations in lockstep: the
total field (with scatterers) and the incident field (uniform medium), whose
difference defines the scattered energy signal.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import BlowUpError, ConfigError, DimensionError, ParameterError
from .grid import Field, Grid2D, _overlap_weights, ddx_wall_array, trapezoid_weights
from .kernels import get_backend, numpy_backend
from .pml import PmlProfile1D

TWO_PI = 2.0 * np.pi

CFL_LIMIT = 0.5


@dataclass(frozen=True)
class MediumParams:
    """Sound speeds of the two materials (meters/second)."""

    c_ambient: float = 1531.0
    c_scatterer: float = 1032.0

    def __post_init__(self):
        if self.c_ambient <= 0 or self.c_scatterer <= 0:
            raise ParameterError("sound speeds must be positive")

    @property
    def c_max(self) -> float:
        return max(self.c_ambient, self.c_scatterer)


@dataclass(frozen=True)
class Design:
    """Scatterer layout: fixed centers, actuated radii."""

    centers: np.ndarray  # (M, 2) meters, (x, y)
    radii: np.ndarray  # (M,) meters
    radius_bounds: tuple[float, float] = (0.2, 1.0)

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        radii = np.asarray(self.radii, dtype=np.float64).ravel()
        if centers.size == 0:
            centers = centers.reshape(0, 2)
        if centers.shape != (radii.size, 2):
            raise DimensionError(
                f"centers shape {centers.shape} does not match {radii.size} radii"
            )
        r_min, r_max = self.radius_bounds
        if not 0 < r_min <= r_max:
            raise ParameterError(f"invalid radius bounds {self.radius_bounds}")
        if radii.size and (radii.min() < r_min - 1e-12 or radii.max() > r_max + 1e-12):
            raise ParameterError(
                f"radii {radii} outside bounds [{r_min}, {r_max}]"
            )
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @property
    def m(self) -> int:
        return self.radii.size

    def with_radii(self, radii: np.ndarray) -> "Design":
        return replace(self, radii=np.asarray(radii, dtype=np.float64))


@dataclass(frozen=True)
class DesignInterpolation:
    """Linear radii schedule over one action interval, rate-limited."""

    start: Design
    end: Design
    t0: float
    t1: float
    rate_limit: float = 500.0  # meters/second

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise ParameterError(f"empty interpolation interval [{self.t0}, {self.t1}]")
        if not np.array_equal(self.start.centers, self.end.centers):
            raise ParameterError("scatterer centers may not move between designs")
        dt = self.t1 - self.t0
        rates = np.abs(self.end.radii - self.start.radii) / dt
        if self.start.m and rates.max() > self.rate_limit * (1 + 1e-9):
            raise ParameterError(
                f"radius change needs {rates.max():.1f} m/s, limit {self.rate_limit} m/s"
            )

    def radii_at(self, t: float) -> np.ndarray:
        span = self.t1 - self.t0
        if t < self.t0 - 1e-9 * span or t > self.t1 + 1e-9 * span:
            raise ParameterError(f"t={t} outside interpolation interval [{self.t0}, {self.t1}]")
        a = min(max((t - self.t0) / span, 0.0), 1.0)
        return (1.0 - a) * self.start.radii + a * self.end.radii


@dataclass
class SourceSpec:
    """Oscillating spatial source: force field f(x, y) times sin(2*pi*omega*t)."""

    f: Field
    omega: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ParameterError(f"source frequency must be positive, got {self.omega}")
        if not np.isfinite(self.f.values).all():
            raise ParameterError("source field contains non-finite values")


def gaussian_source(
    grid: Grid2D,
    center: tuple[float, float] = (0.0, 0.0),
    width_cells: float = 2.0,
    amplitude: float = 1.0,
    omega: float = 1000.0,
    pml_thickness: int = 0,
) -> SourceSpec:
    """Isotropic Gaussian bump, zeroed inside the boundary damping layer."""
    x, y = grid.meshgrid()
    sx = width_cells * grid.dx
    sy = width_cells * grid.dy
    f = amplitude * np.exp(
        -0.5 * ((x - center[0]) / sx) ** 2 - 0.5 * ((y - center[1]) / sy) ** 2
    )
    if pml_thickness > 0:
        k = pml_thickness
        mask = np.zeros(grid.shape, dtype=bool)
        mask[k:-k, k:-k] = True
        f = np.where(mask, f, 0.0)
    return SourceSpec(Field(grid, f), omega)


@dataclass
class RealState:
    """Six coupled fields of the damped split system, plus simulation time.

    ``w`` stacks them as (6, n_y, n_x) in the order
    [u, v_x, v_y, psi_x, psi_y, gamma].
    """

    grid: Grid2D
    w: np.ndarray
    t: float = 0.0

    FIELD_NAMES = ("u", "v_x", "v_y", "psi_x", "psi_y", "gamma")

    def __post_init__(self):
        self.w = np.ascontiguousarray(self.w, dtype=np.float64)
        if self.w.shape != (6,) + self.grid.shape:
            raise DimensionError(
                f"state shape {self.w.shape} does not match grid {(6,) + self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid2D, t: float = 0.0) -> "RealState":
        return cls(grid, np.zeros((6,) + grid.shape), t)

    def _field(self, i: int) -> Field:
        return Field(self.grid, self.w[i])

    @property
    def u(self) -> Field:
        return self._field(0)

    @property
    def v_x(self) -> Field:
        return self._field(1)

    @property
    def v_y(self) -> Field:
        return self._field(2)

    @property
    def psi_x(self) -> Field:
        return self._field(3)

    @property
    def psi_y(self) -> Field:
        return self._field(4)

    @property
    def gamma(self) -> Field:
        return self._field(5)

    def check_finite(self, t: float | None = None) -> None:
        for i, name in enumerate(self.FIELD_NAMES):
            if not np.isfinite(self.w[i]).all():
                raise BlowUpError(name, self.t if t is None else t)

    def copy(self) -> "RealState":
        return RealState(self.grid, self.w.copy(), self.t)


@dataclass
class Observation:
    """Three downsampled displacement frames plus the current radii."""

    frames: np.ndarray  # (3, obs_ny, obs_nx), times tau-2, tau-1, tau
    design_radii: np.ndarray  # (M,)

    def __post_init__(self):
        if self.frames.ndim != 3 or self.frames.shape[0] != 3:
            raise DimensionError(f"observation needs exactly 3 frames, got {self.frames.shape}")


def speed_field(
    design_interp: DesignInterpolation, t: float, medium: MediumParams, grid: Grid2D
) -> Field:
    """Sound-speed field at time t: scatterer speed inside any disk, else ambient.

    Disk membership is a sharp indicator on cell centers; radii interpolate
    linearly across the interval.
    """
    radii = design_interp.radii_at(t)
    design = design_interp.start
    c = np.full(grid.shape, medium.c_ambient)
    if design.m:
        x, y = grid.meshgrid()
        for (cx, cy), r in zip(design.centers, radii):
            c[(x - cx) ** 2 + (y - cy) ** 2 <= r * r] = medium.c_scatterer
    return Field(grid, c)


def _state_derivative(state, c, source, pml_x, pml_y, t, dfdx, dfdy):
    out = np.empty_like(state.w)
    numpy_backend.acoustic_rhs(
        state.w,
        c.values**2,
        dfdx,
        dfdy,
        pml_x.sigma,
        pml_y.sigma,
        float(np.sin(TWO_PI * source.omega * t)),
        1.0 / (2.0 * state.grid.dx),
        1.0 / (2.0 * state.grid.dy),
        out,
    )
    return out


def _source_gradients(source: SourceSpec, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    # the source gradient enters the velocity updates, which carry the
    # pressure-release wall closure
    f = source.f.values
    return ddx_wall_array(f, grid.dx, axis=1), ddx_wall_array(f, grid.dy, axis=0)


def rhs(
    state: RealState,
    c: Field,
    source: SourceSpec,
    pml_x: PmlProfile1D,
    pml_y: PmlProfile1D,
    t: float,
) -> RealState:
    """Time derivative of all six fields.

    u'     = c^2 (dx v_x + dy v_y) + psi_x + psi_y - (sigma_x + sigma_y) u - gamma
    v_x'   = dx(u + f sin(2 pi omega t)) - sigma_x v_x
    v_y'   = dy(u + f sin(2 pi omega t)) - sigma_y v_y
    psi_x' = c^2 sigma_x dy v_y
    psi_y' = c^2 sigma_y dx v_x
    gamma' = sigma_x sigma_y u

    sigma_x is broadcast along y and sigma_y along x.
    """
    state.check_finite(t)
    dfdx, dfdy = _source_gradients(source, state.grid)
    dw = _state_derivative(state, c, source, pml_x, pml_y, t, dfdx, dfdy)
    return RealState(state.grid, dw, state.t)


def rk4_step(
    state: RealState,
    c: Field,
    source: SourceSpec,
    pml_x: PmlProfile1D,
    pml_y: PmlProfile1D,
    dt: float,
) -> RealState:
    """One classical fourth-order Runge-Kutta step with a frozen speed field."""
    backend = get_backend()
    grid = state.grid
    dfdx, dfdy = _source_gradients(source, grid)
    c2 = c.values**2
    out = np.empty_like(state.w)
    backend.acoustic_rk4_step(
        state.w,
        c2,
        c2,
        c2,
        dfdx,
        dfdy,
        pml_x.sigma,
        pml_y.sigma,
        source.omega,
        state.t,
        dt,
        grid.dx,
        grid.dy,
        out,
    )
    return RealState(grid, out, state.t + dt)


def scattered_energy(
    u_tot: Field, u_inc: Field, pml_x_cells: int = 0, pml_y_cells: int = 0
) -> float:
    """Integral of (u_tot - u_inc)^2 over the undamped interior."""
    if u_tot.grid != u_inc.grid:
        raise DimensionError("scattered_energy requires both fields on one grid")
    grid: Grid2D = u_tot.grid
    kx, ky = pml_x_cells, pml_y_cells
    sl = (slice(ky, grid.n_y - ky or None), slice(kx, grid.n_x - kx or None))
    diff = u_tot.values[sl] - u_inc.values[sl]
    return float((diff * diff).sum() * grid.dx * grid.dy)


def discrete_energy(state: RealState, c: Field) -> float:
    """Quadratic energy functional: integral of u^2 + c^2 (v_x^2 + v_y^2).

    Uses trapezoid quadrature (half weight on boundary nodes), the norm in
    which the undamped wall-closed stencil conserves energy exactly.
    """
    u, vx, vy = state.w[0], state.w[1], state.w[2]
    c2 = c.values**2
    dens = u * u + c2 * (vx * vx + vy * vy)
    wy = trapezoid_weights(state.grid.n_y)
    wx = trapezoid_weights(state.grid.n_x)
    return float(wy @ dens @ wx * state.grid.dx * state.grid.dy)


@dataclass
class EpisodeRecord:
    """Everything one episode produced, in arrays sized by the action count.

    ``boundary_frames`` holds the downsampled u_tot frame at every action
    boundary including t = 0, so observations at any step index can be
    reassembled; sigma series are sampled once per integration step.
    """

    boundary_frames: np.ndarray  # (T+1, obs_ny, obs_nx)
    radii: np.ndarray  # (T+1, M)
    actions: np.ndarray  # (T, M) requested radius deltas
    sigma_sc: np.ndarray  # (T * steps_per_action,)
    sigma_tot: np.ndarray
    sigma_inc: np.ndarray
    seed: int | None
    config: dict

    @property
    def n_actions(self) -> int:
        return self.actions.shape[0]

    def observation(self, tau: int) -> Observation:
        """Observation available at action boundary tau (history padded at 0)."""
        if not 0 <= tau <= self.n_actions:
            raise ParameterError(f"tau={tau} outside episode of {self.n_actions} actions")
        idx = [max(tau - 2, 0), max(tau - 1, 0), tau]
        return Observation(self.boundary_frames[idx].copy(), self.radii[tau].copy())

    @property
    def observations(self) -> list[Observation]:
        return [self.observation(tau) for tau in range(self.n_actions + 1)]


@dataclass
class StepOutcome:
    state_tot: RealState
    state_inc: RealState
    design: Design
    observation: Observation
    sigma_sc: np.ndarray  # (steps_per_action,)
    sigma_tot: np.ndarray
    sigma_inc: np.ndarray


class AcousticEnv:
    """Owns grids, profiles, source, and the lockstep total/incident stepping."""

    def __init__(
        self,
        grid: Grid2D,
        medium: MediumParams,
        source: SourceSpec,
        pml_x: PmlProfile1D,
        pml_y: PmlProfile1D,
        design: Design,
        dt: float,
        steps_per_action: int,
        actions_per_episode: int,
        obs_shape: tuple[int, int] = (128, 128),
        actuation_rate: float = 500.0,
        config_snapshot: dict | None = None,
    ):
        if dt <= 0 or steps_per_action < 1 or actions_per_episode < 1:
            raise ConfigError("dt, steps_per_action, actions_per_episode must be positive")
        cfl = medium.c_max * dt / min(grid.dx, grid.dy)
        if cfl > CFL_LIMIT:
            raise ConfigError(
                f"CFL number {cfl:.3f} exceeds {CFL_LIMIT} "
                f"(c_max={medium.c_max}, dt={dt}, dx={min(grid.dx, grid.dy):.4g})"
            )
        if pml_x.grid.n_cells != grid.n_x or pml_y.grid.n_cells != grid.n_y:
            raise ConfigError("damping profiles must match the grid axes")
        self.grid = grid
        self.medium = medium
        self.source = source
        self.pml_x = pml_x
        self.pml_y = pml_y
        self.initial_design = design
        self.dt = dt
        self.steps_per_action = steps_per_action
        self.actions_per_episode = actions_per_episode
        self.obs_shape = tuple(obs_shape)  # (obs_ny, obs_nx)
        self.actuation_rate = actuation_rate
        self.config_snapshot = dict(config_snapshot or {})
        self._check_design_interior(design)

        self._backend = get_backend()
        self._dfdx, self._dfdy = _source_gradients(source, grid)
        x, y = grid.meshgrid()
        self._dist2 = np.ascontiguousarray(
            np.stack(
                [(x - cx) ** 2 + (y - cy) ** 2 for cx, cy in design.centers], axis=0
            )
            if design.m
            else np.zeros((0,) + grid.shape)
        )
        self._c2_amb = np.full(grid.shape, medium.c_ambient**2)
        kx, ky = pml_x.thickness_cells, pml_y.thickness_cells
        self._interior = (slice(ky, grid.n_y - ky or None), slice(kx, grid.n_x - kx or None))
        self._wy = _overlap_weights(grid.n_y, self.obs_shape[0])
        self._wx = _overlap_weights(grid.n_x, self.obs_shape[1])

    # -- setup helpers ------------------------------------------------------

    def _check_design_interior(self, design: Design) -> None:
        if not design.m:
            return
        r_max = design.radius_bounds[1]
        kx, ky = self.pml_x.thickness_cells, self.pml_y.thickness_cells
        x_lim = 0.5 * self.grid.length_x - kx * self.grid.dx
        y_lim = 0.5 * self.grid.length_y - ky * self.grid.dy
        for cx, cy in design.centers:
            if abs(cx) + r_max > x_lim or abs(cy) + r_max > y_lim:
                raise ConfigError(
                    f"scatterer at ({cx}, {cy}) with max radius {r_max} "
                    "extends into the boundary damping layer"
                )

    @property
    def max_delta(self) -> float:
        """Largest radius change one action can request."""
        return self.actuation_rate * self.dt * self.steps_per_action

    def initial_states(self) -> tuple[RealState, RealState]:
        return RealState.zeros(self.grid), RealState.zeros(self.grid)

    def clamp_action(self, design: Design, action: np.ndarray) -> np.ndarray:
        """Rate-limit first, then keep target radii inside bounds."""
        a = np.clip(np.asarray(action, dtype=np.float64), -self.max_delta, self.max_delta)
        r_min, r_max = design.radius_bounds
        target = np.clip(design.radii + a, r_min, r_max)
        return target - design.radii

    def _c2_at(self, radii: np.ndarray, out: np.ndarray) -> np.ndarray:
        return self._backend.build_speed_squared(
            self._dist2, radii, self.medium.c_ambient**2, self.medium.c_scatterer**2, out
        )

    def downsample_u(self, state: RealState) -> np.ndarray:
        return self._wy @ state.w[0] @ self._wx.T

    # -- stepping -----------------------------------------------------------

    def step_action(
        self,
        state_tot: RealState,
        state_inc: RealState,
        design: Design,
        action: np.ndarray,
        prev_frames: Sequence[np.ndarray],
    ) -> StepOutcome:
        """Advance both simulations through one action interval.

        The requested radius deltas are clamped, the radii interpolate
        linearly across the interval, and the three energy integrals are
        recorded after every integration step. ``prev_frames`` supplies the
        two most recent boundary frames for the emitted observation.
        """
        grid = self.grid
        dt = self.dt
        n = self.steps_per_action
        delta = self.clamp_action(design, action)
        new_design = design.with_radii(design.radii + delta)
        t0 = state_tot.t
        interp = DesignInterpolation(
            design, new_design, t0, t0 + n * dt, rate_limit=self.actuation_rate
        )

        w_tot = state_tot.w.copy()
        w_inc = state_inc.w.copy()
        sig = np.empty((3, n))
        c2_a = np.empty(grid.shape)
        c2_b = np.empty(grid.shape)
        c2_c = np.empty(grid.shape)
        scratch = np.empty_like(w_tot)
        self._c2_at(interp.radii_at(t0), c2_a)
        area = grid.dx * grid.dy
        interior = self._interior
        for s in range(n):
            t = t0 + s * dt
            self._c2_at(interp.radii_at(t + 0.5 * dt), c2_b)
            self._c2_at(interp.radii_at(t + dt), c2_c)
            self._backend.acoustic_rk4_step(
                w_tot, c2_a, c2_b, c2_c, self._dfdx, self._dfdy,
                self.pml_x.sigma, self.pml_y.sigma, self.source.omega,
                t, dt, grid.dx, grid.dy, scratch,
            )
            w_tot, scratch = scratch, w_tot
            self._backend.acoustic_rk4_step(
                w_inc, self._c2_amb, self._c2_amb, self._c2_amb,
                self._dfdx, self._dfdy, self.pml_x.sigma, self.pml_y.sigma,
                self.source.omega, t, dt, grid.dx, grid.dy, scratch,
            )
            w_inc, scratch = scratch, w_inc
            c2_a, c2_c = c2_c, c2_a
            ut = w_tot[0][interior]
            ui = w_inc[0][interior]
            d = ut - ui
            sig[0, s] = (d * d).sum() * area
            sig[1, s] = (ut * ut).sum() * area
            sig[2, s] = (ui * ui).sum() * area
        if not np.isfinite(sig).all():
            raise BlowUpError("u", t0 + n * dt)

        t1 = t0 + n * dt
        next_tot = RealState(grid, w_tot, t1)
        next_inc = RealState(grid, w_inc, t1)
        next_tot.check_finite()
        next_inc.check_finite()
        frame = self._wy @ w_tot[0] @ self._wx.T
        obs = Observation(
            np.stack([prev_frames[-2], prev_frames[-1], frame]), new_design.radii.copy()
        )
        return StepOutcome(next_tot, next_inc, new_design, obs, sig[0], sig[1], sig[2])

    def run_episode(
        self,
        policy: str | Callable[[Observation, np.random.Generator], np.ndarray] = "random",
        seed: int | None = 0,
    ) -> EpisodeRecord:
        """Roll a full episode; deterministic given the seed.

        ``policy`` is "random" (uniform radius deltas within the rate limit),
        "zero", or a callable of (observation, rng) returning radius deltas.
        """
        rng = np.random.default_rng(seed)
        n_act = self.actions_per_episode
        m = self.initial_design.m
        if callable(policy):
            act_fn = policy
        elif policy == "random":
            def act_fn(obs, g):
                return g.uniform(-self.max_delta, self.max_delta, m)
        elif policy == "zero":
            def act_fn(obs, g):
                return np.zeros(m)
        else:
            raise ConfigError(f"unknown policy {policy!r}")

        state_tot, state_inc = self.initial_states()
        design = self.initial_design
        frames = np.empty((n_act + 1,) + self.obs_shape)
        radii = np.empty((n_act + 1, m))
        actions = np.empty((n_act, m))
        sig = np.empty((3, n_act * self.steps_per_action))
        frames[0] = self.downsample_u(state_tot)
        radii[0] = design.radii
        for tau in range(n_act):
            i2, i1 = max(tau - 2, 0), max(tau - 1, 0)
            obs = Observation(
                np.stack([frames[i2], frames[i1], frames[tau]]), design.radii.copy()
            )
            action = np.asarray(act_fn(obs, rng), dtype=np.float64)
            out = self.step_action(
                state_tot, state_inc, design, action, (frames[i1], frames[tau])
            )
            state_tot, state_inc, design = out.state_tot, out.state_inc, out.design
            lo = tau * self.steps_per_action
            hi = lo + self.steps_per_action
            sig[0, lo:hi] = out.sigma_sc
            sig[1, lo:hi] = out.sigma_tot
            sig[2, lo:hi] = out.sigma_inc
            actions[tau] = action
            frames[tau + 1] = out.observation.frames[2]
            radii[tau + 1] = design.radii
        return EpisodeRecord(
            boundary_frames=frames,
            radii=radii,
            actions=actions,
            sigma_sc=sig[0].copy(),
            sigma_tot=sig[1].copy(),
            sigma_inc=sig[2].copy(),
            seed=seed if isinstance(seed, int) else None,
            config=dict(self.config_snapshot),
        )


def default_design() -> Design:
    """Four scatterers on a 2x2 lattice between the domain center and +x edge."""
    cx, s = 3.75, 1.5
    centers = np.array(
        [[cx - s / 2, -s / 2], [cx - s / 2, s / 2], [cx + s / 2, -s / 2], [cx + s / 2, s / 2]]
    )
    return Design(centers=centers, radii=np.full(4, 0.6))
