"""Command-line surface.

Subcommands: collect, train, eval-horizon, predict, control, latent-field.
Every command is reproducible from (config file, seeds); outputs are CSV
plus optional SVG line charts, with dataset/checkpoint compatibility
enforced through config hashes. Exit codes: 0 success, 2 configuration
error, 3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import (
    build_env,
    config_diff,
    default_beta,
    load_config,
    model_spec_from_config,
    mpc_config_from,
    train_config_from,
)
from .dataset import Dataset, config_hash, load_dataset, save_dataset
from .encoders import encode_design_window
from .errors import BlowUpError, ConfigError
from .latent import rollout as latent_rollout
from .mpc import compare_policies
from .svgplot import line_chart
from .training import (
    WindowSample,
    build_model,
    evaluate_horizon,
    load_model,
    predict_window,
    save_model,
    train,
    write_horizon_csv,
    write_loss_csv,
)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_hash_match(expected_hash: str, expected_cfg: dict, got_hash: str, got_cfg: dict,
                        what: str) -> None:
    if expected_hash == got_hash:
        return
    diff = config_diff(expected_cfg, got_cfg)
    lines = "\n  ".join(diff[:20]) or "(trees differ in ordering only)"
    raise ConfigError(
        f"config hash mismatch between {what} ({expected_hash} vs {got_hash}); "
        f"differences:\n  {lines}"
    )


def _load_model_for(args, dataset: Dataset):
    model, meta = load_model_with_meta(args.checkpoint)
    _require_hash_match(
        meta.get("config_hash", ""), meta.get("config", {}), dataset.hash, dataset.config,
        "checkpoint and dataset",
    )
    if getattr(args, "no_pml", False):
        model.no_pml = True
    return model, meta


def load_model_with_meta(path):
    from .checkpoint import load_checkpoint

    meta, _, _ = load_checkpoint(path)
    model = load_model(path)
    return model, meta


def _mean_sigma_sc(dataset: Dataset) -> float:
    return float(np.mean([ep.sigma_sc.mean() for ep in dataset.episodes]))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_collect(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    env = build_env(cfg)
    out = _out_dir(args)
    records = []
    for i in range(args.episodes):
        seed = cfg["seed"] + i
        rec = env.run_episode(policy="random", seed=seed)
        records.append(rec)
        print(f"episode {i}: seed {seed}, mean scattered energy {rec.sigma_sc.mean():.6g}")
    save_dataset(out, records, cfg)
    print(f"wrote {len(records)} episodes to {out} (config hash {config_hash(cfg)})")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    dataset = load_dataset(args.dataset)
    _require_hash_match(config_hash(cfg), cfg, dataset.hash, dataset.config,
                        "config and dataset")
    seed = cfg["seed"] if args.seed is None else args.seed
    model = build_model(model_spec_from_config(cfg), seed=seed, no_pml=args.no_pml)
    tcfg = train_config_from(cfg, seed=seed)
    out = _out_dir(args)
    rows = train(dataset, model, tcfg, out_dir=out, log=print)
    save_model(
        model,
        out,
        {
            "config_hash": dataset.hash,
            "config": cfg,
            "mean_sigma_sc": _mean_sigma_sc(dataset),
            "steps": len(rows),
        },
    )
    write_loss_csv(rows, out / "loss.csv")
    if rows:
        xs = [float(r["step"]) for r in rows]
        line_chart(
            [("total", xs, [r["total"] for r in rows]),
             ("mse_sc", xs, [r["mse_sc"] for r in rows])],
            out / "loss.svg",
            title="training loss",
            x_label="optimizer step",
            y_label="normalized MSE",
            log_y=True,
        )
    print(f"trained {len(rows)} steps; checkpoint in {out}")
    return 0


def cmd_eval_horizon(args) -> int:
    dataset = load_dataset(args.dataset)
    model, _ = _load_model_for(args, dataset)
    max_h = min(ep.n_actions for ep in dataset.episodes)
    horizons = [h for h in range(20, 201, 10) if h <= max_h]
    if not horizons:
        raise ConfigError(f"episodes of {max_h} actions are too short for horizon 20")
    rows = evaluate_horizon(model, dataset, horizons, batch_size=args.batch, seed=args.seed or 0)
    out = _out_dir(args)
    write_horizon_csv(rows, out / "horizon.csv")
    line_chart(
        [("mean MSE", [r["horizon"] for r in rows], [r["mean_mse"] for r in rows])],
        out / "horizon.svg",
        title="prediction error vs horizon",
        x_label="horizon (actions)",
        y_label="normalized MSE",
        log_y=True,
    )
    for r in rows:
        print(f"horizon {r['horizon']:4d}: mean {r['mean_mse']:.6g} std {r['std_mse']:.6g}")
    return 0


def cmd_predict(args) -> int:
    dataset = load_dataset(args.dataset)
    model, _ = _load_model_for(args, dataset)
    if not 0 <= args.episode < dataset.n_episodes:
        raise ConfigError(f"episode index {args.episode} outside dataset of {dataset.n_episodes}")
    ep = dataset.episodes[args.episode]
    sample = WindowSample(
        frames=ep.observation(0).frames,
        radii_states=ep.radii,
        target=np.stack([ep.sigma_sc, ep.sigma_tot, ep.sigma_inc]),
        t0=0.0,
    )
    pred = predict_window(model, sample)
    out = _out_dir(args)
    dt = model.dt
    with open(out / "predict.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "sigma_sc", "sigma_hat_sc", "sigma_tot",
                    "sigma_hat_tot", "sigma_inc", "sigma_hat_inc"])
        for s in range(pred.shape[1]):
            w.writerow([s, (s + 1) * dt, ep.sigma_sc[s], pred[0, s], ep.sigma_tot[s],
                        pred[1, s], ep.sigma_inc[s], pred[2, s]])
    ts = [(s + 1) * dt for s in range(pred.shape[1])]
    line_chart(
        [("measured", ts, ep.sigma_sc.tolist()), ("predicted", ts, pred[0].tolist())],
        out / "predict.svg",
        title=f"scattered energy, episode {args.episode}",
        x_label="time (s)",
        y_label="scattered energy",
    )
    print(f"wrote {pred.shape[1]} prediction steps to {out / 'predict.csv'}")
    return 0


def cmd_control(args) -> int:
    cfg = load_config(args.config)
    model, meta = load_model_with_meta(args.checkpoint)
    _require_hash_match(meta.get("config_hash", ""), meta.get("config", {}),
                        config_hash(cfg), cfg, "checkpoint and config")
    if args.no_pml:
        model.no_pml = True
    env = build_env(cfg)
    beta = default_beta(cfg, float(meta.get("mean_sigma_sc", 0.0)))
    mcfg = mpc_config_from(cfg, beta=beta, seed=args.seed)
    result = compare_policies(env, model, mcfg, n_episodes=args.episodes,
                              base_seed=mcfg.seed)
    out = _out_dir(args)
    with open(out / "control.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "episode", "seed", "step", "sigma_sc"])
        for policy in ("random", "mpc"):
            for i, rec in enumerate(result["records"][policy]):
                for s, v in enumerate(rec.sigma_sc):
                    w.writerow([policy, i, rec.seed, s, v])
    with open(out / "control_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "random_mean", "mpc_mean"])
        for i, (r, m) in enumerate(zip(result["random_means"], result["mpc_means"])):
            w.writerow([i, r, m])
        w.writerow(["all", result["random_mean"], result["mpc_mean"]])
    n_steps = len(result["records"]["random"][0].sigma_sc)
    ts = list(range(n_steps))
    mean_rand = np.mean([r.sigma_sc for r in result["records"]["random"]], axis=0)
    mean_mpc = np.mean([r.sigma_sc for r in result["records"]["mpc"]], axis=0)
    line_chart(
        [("random", ts, mean_rand.tolist()), ("mpc", ts, mean_mpc.tolist())],
        out / "control.svg",
        title="mean scattered energy over paired episodes",
        x_label="integration step",
        y_label="scattered energy",
    )
    print(
        f"random mean {result['random_mean']:.6g}, mpc mean {result['mpc_mean']:.6g}, "
        f"reduction {100 * result['reduction']:.1f}%"
    )
    return 0


def cmd_latent_field(args) -> int:
    dataset = load_dataset(args.dataset)
    model, _ = _load_model_for(args, dataset)
    if not 0 <= args.episode < dataset.n_episodes:
        raise ConfigError(f"episode index {args.episode} outside dataset of {dataset.n_episodes}")
    ep = dataset.episodes[args.episode]
    n_act = min(args.actions, ep.n_actions)
    conds, _ = model.encode_observation(ep.observation(0).frames, t=0.0)
    action_dt = model.action_dt
    knots = action_dt * np.arange(n_act + 1)
    speed = encode_design_window(ep.radii[: n_act + 1], model.design, knots)
    _, _, fields = latent_rollout(
        conds, speed, n_act, model.steps_per_action, model.dt, model.c_ambient,
        record_fields=True,
    )
    usc2 = (fields * fields).astype("<f4")
    out = _out_dir(args)
    (out / "latent_field.f32").write_bytes(usc2.tobytes())
    (out / "latent_field.json").write_text(
        json.dumps(
            {
                "shape": list(usc2.shape),
                "layout": "(steps+1, cells) squared scattered latent field",
                "dt": model.dt,
                "dx": model.zgrid.dx,
                "actions": n_act,
                "episode": args.episode,
            },
            indent=1,
        )
    )
    print(f"wrote latent field {usc2.shape} to {out / 'latent_field.f32'}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wavectrl",
        description="Latent-space surrogate modeling and control of 2D acoustic scattering.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, config=False, dataset=False, checkpoint=False, out=True):
        if config:
            sp.add_argument("--config", required=True, help="JSON run configuration")
        if dataset:
            sp.add_argument("dataset", help="dataset directory")
        if checkpoint:
            sp.add_argument("--checkpoint", required=True, help="checkpoint directory")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("collect", help="run random-policy episodes into a dataset")
    add_common(sp, config=True)
    sp.add_argument("--episodes", type=int, default=1)
    sp.set_defaults(func=cmd_collect)

    sp = sub.add_parser("train", help="train the surrogate on a dataset")
    add_common(sp, config=True, dataset=True)
    sp.add_argument("--no-pml", action="store_true", help="disable the latent damping (ablation)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval-horizon", help="prediction MSE across horizons 20..200")
    add_common(sp, dataset=True, checkpoint=True)
    sp.add_argument("--batch", type=int, default=32, help="windows sampled per horizon")
    sp.add_argument("--no-pml", action="store_true")
    sp.set_defaults(func=cmd_eval_horizon)

    sp = sub.add_parser("predict", help="full-episode energy prediction vs measurement")
    add_common(sp, dataset=True, checkpoint=True)
    sp.add_argument("--episode", type=int, default=0, help="episode index")
    sp.add_argument("--no-pml", action="store_true")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("control", help="paired MPC vs random control comparison")
    add_common(sp, config=True, checkpoint=True)
    sp.add_argument("--episodes", type=int, default=6)
    sp.add_argument("--no-pml", action="store_true")
    sp.set_defaults(func=cmd_control)

    sp = sub.add_parser("latent-field", help="latent scattered field over an episode prefix")
    add_common(sp, dataset=True, checkpoint=True)
    sp.add_argument("--episode", type=int, default=0, help="episode index")
    sp.add_argument("--actions", type=int, default=100)
    sp.add_argument("--no-pml", action="store_true")
    sp.set_defaults(func=cmd_latent_field)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
