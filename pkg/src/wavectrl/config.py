"""Run configuration: one JSON tree, strictly validated.

Unknown keys anywhere in the tree are errors (fail-fast against typos);
missing keys fall back to defaults except the few marked required. Builders
turn the resolved tree into environment/model/training/control objects,
raising ConfigError for anything inconsistent (including CFL violations,
which the environment constructor checks at build time).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .env import AcousticEnv, Design, MediumParams, gaussian_source
from .errors import ConfigError
from .grid import Grid2D
from .mpc import MpcConfig
from .pml import build_ramp, zero_profile
from .training import TrainConfig

_REQUIRED = object()

DEFAULTS: dict = {
    "environment": {
        "grid_cells": [128, 128],  # [ny, nx]
        "domain_size": [15.0, 15.0],  # [Ly, Lx] meters
        "dt": 1e-5,
        "steps_per_action": 100,
        "actions_per_episode": 200,
        "obs_shape": [128, 128],
        "c_ambient": 1531.0,
        "c_scatterer": 1032.0,
        "actuation_rate": 500.0,
        "source": {
            "center": [-5.0, 0.0],
            "width_cells": 2.0,
            "amplitude": 1.0,
            "omega": 1000.0,
        },
        "pml": {"thickness": 16, "scale": 12000.0},
        "design": {
            "centers": _REQUIRED,
            "radii": _REQUIRED,
            "radius_bounds": [0.2, 1.0],
        },
    },
    "latent": {
        "cells": 1024,
        "length": None,  # defaults to 4x the domain diagonal
        "n_coeffs": 64,
        "n_pml": 64,
        "pml_scale": 1.0,
        "f_scale": 1.0,
        "conv_channels": [4, 6, 8],
        "dense_width": 8,
        "pool": 4,
        "design_hidden": 24,
    },
    "training": {
        "horizon_actions": 20,
        "batch_size": 32,
        "learning_rate": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "max_epochs": 20,
        "batches_per_epoch": 10,
        "aux_weight_tot": 0.25,
        "aux_weight_inc": 0.25,
    },
    "mpc": {
        "n_shots": 256,
        "horizon": 10,
        "beta": None,  # None: calibrated from the training dataset statistics
    },
    "seed": 0,
}


def _merge(user, defaults, path: str):
    if not isinstance(defaults, dict):
        return user
    if not isinstance(user, dict):
        raise ConfigError(f"config key '{path or '<root>'}' must be a mapping")
    unknown = set(user) - set(defaults)
    if unknown:
        where = f" under '{path}'" if path else ""
        raise ConfigError(f"unknown config keys{where}: {sorted(unknown)}")
    out = {}
    for key, dval in defaults.items():
        sub = f"{path}.{key}" if path else key
        if key in user:
            out[key] = _merge(user[key], dval, sub)
        elif dval is _REQUIRED:
            raise ConfigError(f"missing required config key '{sub}'")
        elif isinstance(dval, dict):
            out[key] = _merge({}, dval, sub)
        else:
            out[key] = dval
    return out


def resolve_config(tree: dict) -> dict:
    """Validate a raw config tree and fill defaults."""
    return _merge(tree, DEFAULTS, "")


def load_config(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        tree = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    return resolve_config(tree)


def config_diff(a: dict, b: dict, path: str = "") -> list[str]:
    """Human-readable list of leaf-level differences between config trees."""
    out = []
    for key in sorted(set(a) | set(b)):
        sub = f"{path}.{key}" if path else key
        if key not in a:
            out.append(f"only in second: {sub}")
        elif key not in b:
            out.append(f"only in first: {sub}")
        elif isinstance(a[key], dict) and isinstance(b[key], dict):
            out.extend(config_diff(a[key], b[key], sub))
        elif a[key] != b[key]:
            out.append(f"{sub}: {a[key]!r} != {b[key]!r}")
    return out


def build_env(cfg: dict, no_pml_env: bool = False) -> AcousticEnv:
    e = cfg["environment"]
    ny, nx = (int(v) for v in e["grid_cells"])
    ly, lx = (float(v) for v in e["domain_size"])
    grid = Grid2D(nx, ny, lx, ly)
    medium = MediumParams(float(e["c_ambient"]), float(e["c_scatterer"]))
    src = e["source"]
    source = gaussian_source(
        grid,
        center=tuple(float(v) for v in src["center"]),
        width_cells=float(src["width_cells"]),
        amplitude=float(src["amplitude"]),
        omega=float(src["omega"]),
        pml_thickness=int(e["pml"]["thickness"]),
    )
    if no_pml_env:
        pml_x = zero_profile(grid_1d_x(grid))
        pml_y = zero_profile(grid_1d_y(grid))
    else:
        pml_x = build_ramp(grid_1d_x(grid), int(e["pml"]["thickness"]), float(e["pml"]["scale"]))
        pml_y = build_ramp(grid_1d_y(grid), int(e["pml"]["thickness"]), float(e["pml"]["scale"]))
    d = e["design"]
    design = Design(
        centers=np.asarray(d["centers"], dtype=np.float64),
        radii=np.asarray(d["radii"], dtype=np.float64),
        radius_bounds=tuple(float(v) for v in d["radius_bounds"]),
    )
    try:
        return AcousticEnv(
            grid,
            medium,
            source,
            pml_x,
            pml_y,
            design,
            dt=float(e["dt"]),
            steps_per_action=int(e["steps_per_action"]),
            actions_per_episode=int(e["actions_per_episode"]),
            obs_shape=tuple(int(v) for v in e["obs_shape"]),
            actuation_rate=float(e["actuation_rate"]),
            config_snapshot=cfg,
        )
    except (ValueError, ArithmeticError) as exc:
        raise ConfigError(str(exc)) from exc


def grid_1d_x(grid: Grid2D):
    from .grid import Grid1D

    return Grid1D(grid.n_x, grid.length_x)


def grid_1d_y(grid: Grid2D):
    from .grid import Grid1D

    return Grid1D(grid.n_y, grid.length_y)


def latent_length(cfg: dict) -> float:
    lat = cfg["latent"]
    if lat["length"] is not None:
        return float(lat["length"])
    ly, lx = (float(v) for v in cfg["environment"]["domain_size"])
    return 4.0 * math.hypot(lx, ly)


def model_spec_from_config(cfg: dict) -> dict:
    e = cfg["environment"]
    lat = cfg["latent"]
    return {
        "obs_shape": [int(v) for v in e["obs_shape"]],
        "latent_cells": int(lat["cells"]),
        "latent_length": latent_length(cfg),
        "n_coeffs": int(lat["n_coeffs"]),
        "n_pml": int(lat["n_pml"]),
        "conv_channels": [int(v) for v in lat["conv_channels"]],
        "dense_width": int(lat["dense_width"]),
        "pool": int(lat["pool"]),
        "pml_scale": float(lat["pml_scale"]),
        "f_scale": float(lat["f_scale"]),
        "design_hidden": int(lat["design_hidden"]),
        "n_scatterers": len(cfg["environment"]["design"]["radii"]),
        "c_ambient": float(e["c_ambient"]),
        "omega": float(e["source"]["omega"]),
        "dt": float(e["dt"]),
        "steps_per_action": int(e["steps_per_action"]),
    }


def train_config_from(cfg: dict, seed: int | None = None) -> TrainConfig:
    t = cfg["training"]
    try:
        return TrainConfig(
            horizon_actions=int(t["horizon_actions"]),
            batch_size=int(t["batch_size"]),
            learning_rate=float(t["learning_rate"]),
            beta1=float(t["beta1"]),
            beta2=float(t["beta2"]),
            max_epochs=int(t["max_epochs"]),
            batches_per_epoch=int(t["batches_per_epoch"]),
            aux_weight_tot=float(t["aux_weight_tot"]),
            aux_weight_inc=float(t["aux_weight_inc"]),
            seed=int(cfg["seed"] if seed is None else seed),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def mpc_config_from(cfg: dict, beta: float, seed: int | None = None) -> MpcConfig:
    m = cfg["mpc"]
    try:
        return MpcConfig(
            n_shots=int(m["n_shots"]),
            horizon=int(m["horizon"]),
            beta=float(m["beta"]) if m["beta"] is not None else float(beta),
            seed=int(cfg["seed"] if seed is None else seed),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def default_beta(cfg: dict, mean_sigma_sc: float) -> float:
    """Action penalty sized at a tenth of a typical per-interval energy term.

    The per-interval energy contribution is dt * steps * mean scattered
    energy; dividing by the largest reachable squared action norm makes the
    penalty comparable at full actuation.
    """
    e = cfg["environment"]
    dt = float(e["dt"])
    spa = int(e["steps_per_action"])
    m = len(e["design"]["radii"])
    max_delta = float(e["actuation_rate"]) * dt * spa
    denom = max(m * max_delta * max_delta, 1e-30)
    return 0.1 * dt * spa * max(mean_sigma_sc, 0.0) / denom
