"""Surrogate model training.

The trained artifact is a pair of encoders plus the latent integrator: the
wave encoder maps one observation to latent initial conditions, the design
encoder maps radii to latent speed frames, and the rollout predicts energy
series whose mismatch against measured series is the loss. Gradients come
from the exact discrete adjoint of the RK4 recurrence: windows are
checkpointed at action boundaries on the way forward and re-integrated one
at a time during the reverse sweep, so memory stays at one window of stage
states regardless of horizon.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, restore_params, save_checkpoint
from .dataset import Dataset
from .encoders import DesignEncoder, ParamStore, WaveEncoder
from .errors import (
    BlowUpError,
    ConfigError,
    DimensionError,
    GradientError,
    ParameterError,
)
from .grid import Field, Grid1D, ddx_wall_transpose_array
from .kernels import get_backend
from .latent import LatentConditions, _dfdx_row


@dataclass
class TrainConfig:
    horizon_actions: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    max_epochs: int = 20
    batches_per_epoch: int = 10
    aux_weight_tot: float = 0.25
    aux_weight_inc: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.horizon_actions < 1 or self.batch_size < 1:
            raise ParameterError("horizon_actions and batch_size must be >= 1")
        if self.max_epochs < 1 or self.batches_per_epoch < 1:
            raise ParameterError("max_epochs and batches_per_epoch must be >= 1")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("moment coefficients must lie in [0, 1)")
        if self.aux_weight_tot < 0 or self.aux_weight_inc < 0:
            raise ParameterError("auxiliary loss weights must be >= 0")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (1.0, self.aux_weight_tot, self.aux_weight_inc)


@dataclass
class LossReport:
    mse_sc: float
    mse_tot: float
    mse_inc: float
    total: float


def loss(pred: np.ndarray, target: np.ndarray, weights=(1.0, 0.0, 0.0)) -> LossReport:
    """Discrete MSE of the three energy series, combined with weights.

    The mean over steps approximates the squared-error time integral up to
    the constant dt factor.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 2 or pred.shape[0] != 3:
        raise DimensionError(
            f"loss expects matching (3, steps) series, got {pred.shape} vs {target.shape}"
        )
    d = pred - target
    mses = (d * d).mean(axis=1)
    total = float(weights[0] * mses[0] + weights[1] * mses[1] + weights[2] * mses[2])
    return LossReport(float(mses[0]), float(mses[1]), float(mses[2]), total)


# ---------------------------------------------------------------------------
# Model container
# ---------------------------------------------------------------------------

MODEL_SPEC_DEFAULTS = {
    "obs_shape": [128, 128],
    "latent_cells": 1024,
    "latent_length": None,  # required
    "n_coeffs": 64,
    "n_pml": 64,
    "conv_channels": [4, 6, 8],
    "dense_width": 8,
    "pool": 4,
    "pml_scale": 1.0,
    "f_scale": 1.0,
    "design_hidden": 24,
    "n_scatterers": None,  # required
    "c_ambient": None,  # required
    "c_max": None,  # defaults to the latent stability limit
    "omega": None,  # required
    "dt": None,  # required
    "steps_per_action": None,  # required
}


@dataclass
class SurrogateModel:
    store: ParamStore
    wave: WaveEncoder
    design: DesignEncoder
    zgrid: Grid1D
    c_ambient: float
    dt: float
    steps_per_action: int
    spec: dict
    norm_scale: float = 1.0
    no_pml: bool = False

    def encode_observation(self, frames: np.ndarray, t: float = 0.0):
        """Latent conditions plus the backward cache for one observation."""
        conds, cache = self.wave.encode(np.asarray(frames, dtype=np.float64), t=t)
        if self.no_pml:
            conds = LatentConditions(
                conds.initial,
                conds.f_z,
                Field(self.zgrid, np.zeros(self.zgrid.n_cells)),
                conds.omega,
            )
        return conds, cache

    @property
    def action_dt(self) -> float:
        return self.dt * self.steps_per_action


def build_model(spec: dict, seed: int, no_pml: bool = False) -> SurrogateModel:
    """Construct a fresh model from a hyperparameter dict (see defaults)."""
    unknown = set(spec) - set(MODEL_SPEC_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown model spec keys: {sorted(unknown)}")
    full = {**MODEL_SPEC_DEFAULTS, **spec}
    missing = [k for k, v in full.items() if v is None and k != "c_max"]
    if missing:
        raise ConfigError(f"model spec missing required keys: {sorted(missing)}")
    zgrid = Grid1D(int(full["latent_cells"]), float(full["latent_length"]))
    dt = float(full["dt"])
    c_stab = 0.5 * zgrid.dx / dt
    c_max = c_stab if full["c_max"] is None else float(full["c_max"])
    full["c_max"] = c_max
    if c_max > c_stab + 1e-9:
        raise ConfigError(
            f"latent speed cap {c_max:g} exceeds the stability limit {c_stab:g} "
            f"(latent dx {zgrid.dx:g}, dt {dt:g})"
        )
    store = ParamStore(seed)
    wave = WaveEncoder(
        store,
        tuple(full["obs_shape"]),
        zgrid,
        omega=float(full["omega"]),
        n_coeffs=int(full["n_coeffs"]),
        n_pml=int(full["n_pml"]),
        conv_channels=tuple(full["conv_channels"]),
        dense_width=int(full["dense_width"]),
        pool=int(full["pool"]),
        pml_scale=float(full["pml_scale"]),
        v_scale=1.0 / float(full["c_ambient"]),
        f_scale=float(full["f_scale"]),
    )
    design = DesignEncoder(
        store,
        int(full["n_scatterers"]),
        zgrid,
        c_ambient=float(full["c_ambient"]),
        c_max=c_max,
        n_coeffs=int(full["n_coeffs"]),
        hidden=int(full["design_hidden"]),
    )
    return SurrogateModel(
        store=store,
        wave=wave,
        design=design,
        zgrid=zgrid,
        c_ambient=float(full["c_ambient"]),
        dt=dt,
        steps_per_action=int(full["steps_per_action"]),
        spec=full,
        no_pml=no_pml,
    )


def save_model(model: SurrogateModel, out_dir: str | Path, extra_meta: dict | None = None) -> Path:
    meta = {
        "spec": model.spec,
        "seed": model.store.seed,
        "norm_scale": model.norm_scale,
        "no_pml": model.no_pml,
    }
    if extra_meta:
        meta.update(extra_meta)
    return save_checkpoint(out_dir, model.store, meta)


def load_model(in_dir: str | Path) -> SurrogateModel:
    meta, params_manifest, blob = load_checkpoint(in_dir)
    model = build_model(meta["spec"], int(meta["seed"]), no_pml=bool(meta["no_pml"]))
    restore_params(model.store, params_manifest, blob)
    model.norm_scale = float(meta["norm_scale"])
    return model


# ---------------------------------------------------------------------------
# Batched latent rollout over action windows
# ---------------------------------------------------------------------------


def rollout_windows(
    model: SurrogateModel,
    y0: np.ndarray,
    frames: np.ndarray,
    sigma: np.ndarray,
    dfdx: np.ndarray,
    t0: np.ndarray,
    omega: float,
    keep_checkpoints: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Integrate (4, B, n) states through K-1 action windows.

    ``frames`` is (K, B, n): the speed interpolates linearly inside each
    window between consecutive frames. Returns the (3, B, steps) energy
    series and, when requested, the (K, 4, B, n) states at every window
    boundary for the reverse sweep. Non-finite results are returned as-is;
    callers decide whether that is fatal.
    """
    backend = get_backend()
    n_actions = frames.shape[0] - 1
    spa = model.steps_per_action
    b = y0.shape[1]
    y = y0.copy()
    sig = np.empty((3, b, n_actions * spa))
    ckpts = np.empty((n_actions + 1,) + y.shape) if keep_checkpoints else None
    if ckpts is not None:
        ckpts[0] = y
    ca2 = model.c_ambient**2
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_actions):
            backend.latent_window_forward(
                y,
                frames[k],
                frames[k + 1],
                ca2,
                sigma,
                dfdx,
                omega,
                t0 + k * spa * model.dt,
                model.dt,
                spa,
                model.zgrid.dx,
                sig[:, :, k * spa : (k + 1) * spa],
                None,
            )
            if ckpts is not None:
                ckpts[k + 1] = y
    return sig, ckpts


# ---------------------------------------------------------------------------
# Window sampling and the adjoint sweep
# ---------------------------------------------------------------------------


@dataclass
class WindowSample:
    frames: np.ndarray  # (3, obs_ny, obs_nx) observation at the window start
    radii_states: np.ndarray  # (horizon+1, M) design states across the window
    target: np.ndarray  # (3, horizon*steps_per_action) measured series
    t0: float


def sample_windows(
    dataset: Dataset,
    horizon: int,
    batch_size: int,
    model: SurrogateModel,
    rng: np.random.Generator,
    min_start: int = 2,
    max_start: int | None = None,
) -> list[WindowSample]:
    """Uniform windows over (episode, start offset); offsets default to >= 2
    so the observation carries three distinct frames. ``max_start`` caps the
    offset so different horizons can share one start distribution."""
    spa = model.steps_per_action
    out = []
    for _ in range(batch_size):
        ep = dataset.episodes[int(rng.integers(dataset.n_episodes))]
        last = ep.n_actions - horizon
        if max_start is not None:
            last = min(last, max_start)
        if last < 0:
            raise ParameterError(
                f"episode of {ep.n_actions} actions shorter than horizon {horizon}"
            )
        lo = min_start if last >= min_start else 0
        tau = int(rng.integers(lo, last + 1))
        sig = np.stack([ep.sigma_sc, ep.sigma_tot, ep.sigma_inc])
        out.append(
            WindowSample(
                frames=ep.observation(tau).frames,
                radii_states=ep.radii[tau : tau + horizon + 1].copy(),
                target=sig[:, tau * spa : (tau + horizon) * spa].copy(),
                t0=tau * spa * model.dt,
            )
        )
    return out


def _tree_sum(vecs: list[np.ndarray]) -> np.ndarray:
    """Pairwise reduction: deterministic and order-independent."""
    while len(vecs) > 1:
        nxt = [vecs[i] + vecs[i + 1] for i in range(0, len(vecs) - 1, 2)]
        if len(vecs) % 2:
            nxt.append(vecs[-1])
        vecs = nxt
    return vecs[0]


def adjoint_gradients(
    model: SurrogateModel,
    batch: list[WindowSample],
    weights: tuple[float, float, float] = (1.0, 0.0, 0.0),
) -> LossReport:
    """Exact gradients of the batch-mean loss, left in ``model.store.grads``.

    Forward: encode, roll every window with action-boundary checkpoints.
    Backward: per window (in reverse), re-integrate from its checkpoint with
    per-step storage and run the RK4 reverse sweep; then chain the
    accumulated field gradients through both encoders per batch element and
    tree-sum the per-element parameter vectors.
    """
    if not batch:
        raise ParameterError("empty batch")
    backend = get_backend()
    nb = len(batch)
    n = model.zgrid.n_cells
    n_actions = batch[0].radii_states.shape[0] - 1
    spa = model.steps_per_action
    steps = n_actions * spa
    dx = model.zgrid.dx
    scale = model.norm_scale

    y0 = np.empty((4, nb, n))
    sigma = np.empty((nb, n))
    dfdx = np.empty((nb, n))
    frames = np.empty((n_actions + 1, nb, n))
    t0 = np.empty(nb)
    target = np.empty((3, nb, steps))
    wcaches, dcaches = [], []
    omega = None
    for b, s in enumerate(batch):
        if s.radii_states.shape[0] != n_actions + 1 or s.target.shape != (3, steps):
            raise DimensionError("batch elements must share one window shape")
        conds, wc = model.encode_observation(s.frames, t=s.t0)
        cframes, dc = model.design.frames(s.radii_states)
        y0[:, b, :] = conds.initial.y
        sigma[b] = conds.sigma_z.values
        dfdx[b] = _dfdx_row(conds.f_z)[0]
        frames[:, b, :] = cframes
        t0[b] = s.t0
        target[:, b, :] = s.target
        wcaches.append(wc)
        dcaches.append(dc)
        omega = conds.omega

    sig, ckpts = rollout_windows(
        model, y0, frames, sigma, dfdx, t0, omega, keep_checkpoints=True
    )
    if not np.isfinite(sig).all():
        raise BlowUpError("u_tot", float(t0.max() + steps * model.dt))

    diff = (sig - target) / scale
    mses = (diff * diff).mean(axis=2)  # (3, B)
    batch_mse = mses.mean(axis=1)
    report = LossReport(
        float(batch_mse[0]),
        float(batch_mse[1]),
        float(batch_mse[2]),
        float(np.dot(weights, batch_mse)),
    )

    gsig = diff * (2.0 / (steps * nb * scale)) * np.asarray(weights)[:, None, None]

    lam = np.zeros((4, nb, n))
    gframes = np.zeros_like(frames)
    gsigma = np.zeros_like(sigma)
    gdfdx = np.zeros_like(dfdx)
    storebuf = np.empty((spa + 1, 4, nb, n))
    sig_dummy = np.empty((3, nb, spa))
    ca2 = model.c_ambient**2
    for k in range(n_actions - 1, -1, -1):
        y = ckpts[k].copy()
        tk = t0 + k * spa * model.dt
        backend.latent_window_forward(
            y, frames[k], frames[k + 1], ca2, sigma, dfdx, omega,
            tk, model.dt, spa, dx, sig_dummy, storebuf,
        )
        sl = slice(k * spa, (k + 1) * spa)
        backend.latent_window_backward(
            lam, storebuf, frames[k], frames[k + 1], ca2, sigma, dfdx, omega,
            tk, model.dt, spa, dx,
            gsig[0, :, sl], gsig[1, :, sl], gsig[2, :, sl],
            gframes[k], gframes[k + 1], gsigma, gdfdx,
        )

    store = model.store
    zero_sigma = np.zeros(n)
    vecs = []
    for b in range(nb):
        store.zero_grads()
        gfz = ddx_wall_transpose_array(gdfdx[b], dx)
        gsig_b = zero_sigma if model.no_pml else gsigma[b]
        model.wave.backward(wcaches[b], lam[:, b, :], gfz, gsig_b)
        model.design.backward(dcaches[b], gframes[:, b, :])
        vecs.append(store.grads_to_vector())
    store.grads_from_vector(_tree_sum(vecs))
    for name, grad in store.grads.items():
        if not np.isfinite(grad).all():
            raise GradientError(name)
    return report


# ---------------------------------------------------------------------------
# Optimizer and the training loop
# ---------------------------------------------------------------------------


class Adam:
    """Adaptive moment estimation over a ParamStore."""

    def __init__(self, store: ParamStore, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in store.params.items()}
        self.v = {k: np.zeros_like(p) for k, p in store.params.items()}

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in self.store.params.items():
            g = self.store.grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def dataset_norm_scale(dataset: Dataset) -> float:
    """Mean total energy across the dataset; loss series are divided by it."""
    total = sum(float(ep.sigma_tot.mean()) for ep in dataset.episodes)
    mean = total / max(dataset.n_episodes, 1)
    return mean if mean > 0 else 1.0


def train(
    dataset: Dataset,
    model: SurrogateModel,
    cfg: TrainConfig,
    out_dir: str | Path | None = None,
    log=None,
) -> list[dict]:
    """Optimize the encoders on sampled windows; returns the loss curve rows.

    Deterministic given ``cfg.seed``. Window batches whose latent rollout
    blows up are skipped (expected before the speed frames settle). When
    ``out_dir`` is given, a checkpoint and the loss CSV are rewritten after
    every epoch.
    """
    rng = np.random.default_rng(cfg.seed)
    model.norm_scale = dataset_norm_scale(dataset)
    adam = Adam(model.store, cfg.learning_rate, cfg.beta1, cfg.beta2)
    rows: list[dict] = []
    step = 0
    skipped = 0
    for epoch in range(cfg.max_epochs):
        for _ in range(cfg.batches_per_epoch):
            batch = sample_windows(dataset, cfg.horizon_actions, cfg.batch_size, model, rng)
            try:
                report = adjoint_gradients(model, batch, cfg.weights)
            except BlowUpError:
                skipped += 1
                model.store.zero_grads()
                if log:
                    log(f"epoch {epoch}: skipped one batch (latent blow-up)")
                continue
            adam.step()
            step += 1
            rows.append(
                {
                    "step": step,
                    "epoch": epoch,
                    "mse_sc": report.mse_sc,
                    "mse_tot": report.mse_tot,
                    "mse_inc": report.mse_inc,
                    "total": report.total,
                }
            )
        if out_dir is not None:
            save_model(model, out_dir, {"epoch": epoch, "steps": step, "skipped": skipped})
            write_loss_csv(rows, Path(out_dir) / "loss.csv")
        if log and rows:
            log(f"epoch {epoch}: loss {rows[-1]['total']:.6g} (skipped {skipped})")
    return rows


def write_loss_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "epoch", "mse_sc", "mse_tot", "mse_inc", "total"])
        for r in rows:
            w.writerow([r["step"], r["epoch"], r["mse_sc"], r["mse_tot"], r["mse_inc"], r["total"]])


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def predict_batch(model: SurrogateModel, samples: list[WindowSample]) -> np.ndarray:
    """Predicted (3, B, steps) energy series for same-shaped windows."""
    nb = len(samples)
    n = model.zgrid.n_cells
    n_actions = samples[0].radii_states.shape[0] - 1
    y0 = np.empty((4, nb, n))
    sigma = np.empty((nb, n))
    dfdx = np.empty((nb, n))
    frames = np.empty((n_actions + 1, nb, n))
    t0 = np.empty(nb)
    omega = None
    for b, s in enumerate(samples):
        conds, _ = model.encode_observation(s.frames, t=s.t0)
        cframes, _ = model.design.frames(s.radii_states)
        y0[:, b, :] = conds.initial.y
        sigma[b] = conds.sigma_z.values
        dfdx[b] = _dfdx_row(conds.f_z)[0]
        frames[:, b, :] = cframes
        t0[b] = s.t0
        omega = conds.omega
    sig, _ = rollout_windows(model, y0, frames, sigma, dfdx, t0, omega)
    return sig


def predict_window(model: SurrogateModel, sample: WindowSample) -> np.ndarray:
    """Predicted (3, steps) energy series for one window."""
    return predict_batch(model, [sample])[:, 0, :]


def evaluate_horizon(
    model: SurrogateModel,
    dataset: Dataset,
    horizons=range(20, 201, 10),
    batch_size: int = 32,
    seed: int = 0,
) -> list[dict]:
    """Normalized scattered-energy MSE distribution per prediction horizon.

    Every horizon draws its window starts from the range valid for the
    longest horizon, so the curves differ only in how far they predict."""
    rng = np.random.default_rng(seed)
    scale = model.norm_scale
    max_start = min(ep.n_actions for ep in dataset.episodes) - max(int(h) for h in horizons)
    if max_start < 0:
        raise ParameterError(
            f"longest horizon {max(int(h) for h in horizons)} exceeds the shortest episode"
        )
    rows = []
    for h in horizons:
        samples = sample_windows(
            dataset, int(h), batch_size, model, rng, min_start=0, max_start=max_start
        )
        pred = predict_batch(model, samples)
        mses = []
        for b, s in enumerate(samples):
            d = (pred[0, b] - s.target[0]) / scale
            mses.append(float((d * d).mean()) if np.isfinite(d).all() else float("inf"))
        arr = np.asarray(mses)
        rows.append({"horizon": int(h), "mean_mse": float(arr.mean()), "std_mse": float(arr.std())})
    return rows


def write_horizon_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["horizon", "mean_mse", "std_mse"])
        for r in rows:
            w.writerow([r["horizon"], r["mean_mse"], r["std_mse"]])
