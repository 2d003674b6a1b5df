"""Random-shooting model-predictive control.

Each control step: encode the current observation once, sample candidate
action sequences, roll every candidate through the latent surrogate in one
batch (candidates differ only through the design encoder's speed frames),
and apply the first action of the cheapest sequence to the real
environment. Cost is the predicted scattered energy integral plus a
quadratic action penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import AcousticEnv, EpisodeRecord, Observation
from .errors import DimensionError, ParameterError
from .latent import _dfdx_row
from .training import SurrogateModel, rollout_windows


@dataclass
class MpcConfig:
    n_shots: int = 256
    horizon: int = 10
    beta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_shots < 1:
            raise ParameterError("n_shots must be >= 1")
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        if self.beta < 0:
            raise ParameterError("beta must be >= 0")


def cost(sigma_hat_sc: np.ndarray, actions: np.ndarray, beta: float, dt: float) -> float:
    """Sum over the horizon of the discrete scattered-energy time integral
    plus ``beta`` times the squared action norm."""
    sigma_hat_sc = np.asarray(sigma_hat_sc, dtype=np.float64)
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    if sigma_hat_sc.ndim != 1 or actions.ndim != 2:
        raise DimensionError("cost expects a 1D energy series and (horizon, M) actions")
    if sigma_hat_sc.size % actions.shape[0]:
        raise DimensionError(
            f"series of {sigma_hat_sc.size} steps does not cover {actions.shape[0]} actions"
        )
    return float(dt * sigma_hat_sc.sum() + beta * (actions * actions).sum())


def sample_shots(
    radii: np.ndarray,
    n_shots: int,
    horizon: int,
    max_delta: float,
    radius_bounds: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate design trajectories within rate and radius limits.

    Returns (radii_states (S, horizon+1, M), actions (S, horizon, M)); the
    actions are the realized per-step deltas after clamping.
    """
    m = radii.shape[0]
    deltas = rng.uniform(-max_delta, max_delta, (n_shots, horizon, m))
    states = np.empty((n_shots, horizon + 1, m))
    states[:, 0, :] = radii
    lo, hi = radius_bounds
    for k in range(horizon):
        states[:, k + 1, :] = np.clip(states[:, k, :] + deltas[:, k, :], lo, hi)
    actions = np.diff(states, axis=1)
    return states, actions


@dataclass
class PlanResult:
    action: np.ndarray
    shot_index: int
    cost: float
    n_valid: int
    fallback: bool = False


def plan(
    obs: Observation,
    model: SurrogateModel,
    cfg: MpcConfig,
    max_delta: float,
    radius_bounds: tuple[float, float],
    rng: np.random.Generator,
    t0: float = 0.0,
) -> PlanResult:
    """First action of the lowest-cost sampled sequence (ties: lowest index).

    Shots whose latent rollout goes non-finite are discarded; if every shot
    blows up the zero action is returned with ``fallback`` set.
    """
    states, actions = sample_shots(
        obs.design_radii, cfg.n_shots, cfg.horizon, max_delta, radius_bounds, rng
    )
    s = cfg.n_shots
    n = model.zgrid.n_cells
    conds, _ = model.encode_observation(obs.frames, t=t0)
    flat_frames, _ = model.design.frames(states.reshape(s * (cfg.horizon + 1), -1))
    frames = flat_frames.reshape(s, cfg.horizon + 1, n).transpose(1, 0, 2).copy()
    y0 = np.broadcast_to(conds.initial.y[:, None, :], (4, s, n)).copy()
    sigma = np.broadcast_to(conds.sigma_z.values, (s, n)).copy()
    dfdx = np.broadcast_to(_dfdx_row(conds.f_z)[0], (s, n)).copy()
    sig, _ = rollout_windows(
        model, y0, frames, sigma, dfdx, np.full(s, t0), conds.omega
    )
    dt = model.dt
    costs = np.empty(s)
    for i in range(s):
        series = sig[0, i]
        if np.isfinite(series).all():
            costs[i] = cost(series, actions[i], cfg.beta, dt)
        else:
            costs[i] = np.inf
    n_valid = int(np.isfinite(costs).sum())
    if n_valid == 0:
        return PlanResult(np.zeros_like(obs.design_radii), -1, float("inf"), 0, True)
    best = int(np.argmin(costs))
    return PlanResult(actions[best, 0].copy(), best, float(costs[best]), n_valid)


def control_episode(env: AcousticEnv, model: SurrogateModel, cfg: MpcConfig) -> EpisodeRecord:
    """Closed-loop episode: observe, plan, apply the first action, repeat."""
    rng = np.random.default_rng(cfg.seed)
    action_dt = env.dt * env.steps_per_action
    counter = {"tau": 0}

    def policy(obs: Observation, _env_rng: np.random.Generator) -> np.ndarray:
        t0 = counter["tau"] * action_dt
        counter["tau"] += 1
        result = plan(
            obs,
            model,
            cfg,
            env.max_delta,
            env.initial_design.radius_bounds,
            rng,
            t0=t0,
        )
        return result.action

    return env.run_episode(policy=policy, seed=cfg.seed)


def compare_policies(
    env: AcousticEnv,
    model: SurrogateModel,
    cfg: MpcConfig,
    n_episodes: int = 6,
    base_seed: int = 0,
) -> dict:
    """Paired-seed comparison of MPC against the random policy.

    Returns per-episode mean scattered energies and the relative reduction
    of the paired means.
    """
    random_means, mpc_means = [], []
    records = {"random": [], "mpc": []}
    for i in range(n_episodes):
        seed = base_seed + i
        rec_rand = env.run_episode(policy="random", seed=seed)
        ep_cfg = MpcConfig(cfg.n_shots, cfg.horizon, cfg.beta, seed)
        rec_mpc = control_episode(env, model, ep_cfg)
        random_means.append(float(rec_rand.sigma_sc.mean()))
        mpc_means.append(float(rec_mpc.sigma_sc.mean()))
        records["random"].append(rec_rand)
        records["mpc"].append(rec_mpc)
    rand_mean = float(np.mean(random_means))
    mpc_mean = float(np.mean(mpc_means))
    return {
        "random_means": random_means,
        "mpc_means": mpc_means,
        "random_mean": rand_mean,
        "mpc_mean": mpc_mean,
        "reduction": (rand_mean - mpc_mean) / rand_mean if rand_mean > 0 else 0.0,
        "records": records,
    }
