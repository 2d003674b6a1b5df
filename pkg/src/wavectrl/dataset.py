"""Episode dataset persistence.

Layout: one directory holding ``manifest.json`` plus, per episode, raw
little-endian float32 blobs for frames/radii/sigma series and a CSV of the
requested actions. The manifest records shapes, the generating config and
its hash, so loads are self-describing and mismatches fail fast.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import EpisodeRecord
from .errors import ConfigError

FORMAT = "wavectrl-dataset-v1"


def config_hash(config: dict) -> str:
    """Stable short hash of a JSON-serializable config tree."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _write_f32(path: Path, arr: np.ndarray) -> None:
    path.write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_f32(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float64)
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise ConfigError(f"{path.name}: {arr.size} values, manifest says {expected}")
    return arr.reshape(shape)


@dataclass
class Dataset:
    episodes: list[EpisodeRecord]
    config: dict
    hash: str

    @property
    def n_episodes(self) -> int:
        return len(self.episodes)


def save_dataset(out_dir: str | Path, episodes: list[EpisodeRecord], config: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, ep in enumerate(episodes):
        stem = f"ep{i:04d}"
        _write_f32(out / f"{stem}_frames.f32", ep.boundary_frames)
        _write_f32(out / f"{stem}_radii.f32", ep.radii)
        _write_f32(out / f"{stem}_sigma.f32", np.stack([ep.sigma_sc, ep.sigma_tot, ep.sigma_inc]))
        with open(out / f"{stem}_actions.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"delta_{m}" for m in range(ep.actions.shape[1])])
            w.writerows(ep.actions.tolist())
        entries.append(
            {
                "stem": stem,
                "seed": ep.seed,
                "n_actions": int(ep.n_actions),
                "obs_shape": list(ep.boundary_frames.shape[1:]),
                "n_scatterers": int(ep.radii.shape[1]),
                "n_sigma_steps": int(ep.sigma_sc.shape[0]),
            }
        )
    manifest = {
        "format": FORMAT,
        "config": config,
        "config_hash": config_hash(config),
        "episodes": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return out


def load_dataset(in_dir: str | Path) -> Dataset:
    src = Path(in_dir)
    mpath = src / "manifest.json"
    if not mpath.is_file():
        raise ConfigError(f"no manifest.json in {src}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("format") != FORMAT:
        raise ConfigError(f"unsupported dataset format {manifest.get('format')!r}")
    episodes = []
    for e in manifest["episodes"]:
        stem = e["stem"]
        t, m = e["n_actions"], e["n_scatterers"]
        oy, ox = e["obs_shape"]
        frames = _read_f32(src / f"{stem}_frames.f32", (t + 1, oy, ox))
        radii = _read_f32(src / f"{stem}_radii.f32", (t + 1, m))
        sigma = _read_f32(src / f"{stem}_sigma.f32", (3, e["n_sigma_steps"]))
        with open(src / f"{stem}_actions.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        actions = np.array([[float(v) for v in row] for row in rows[1:]])
        if actions.shape != (t, m):
            raise ConfigError(f"{stem}_actions.csv shape {actions.shape}, expected {(t, m)}")
        episodes.append(
            EpisodeRecord(
                boundary_frames=frames,
                radii=radii,
                actions=actions,
                sigma_sc=sigma[0],
                sigma_tot=sigma[1],
                sigma_inc=sigma[2],
                seed=e["seed"],
                config=manifest["config"],
            )
        )
    return Dataset(episodes, manifest["config"], manifest["config_hash"])
