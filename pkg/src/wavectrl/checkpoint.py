"""Checkpoint persistence: a JSON manifest plus one float32 parameter blob.

The manifest stores the model hyperparameters needed to rebuild the encoder
pair, the per-tensor shapes in serialization order, and arbitrary metadata
(config hash, normalization scale, training progress).
"""

from __future__ import annotations

import json
from pathlib import Path

from .encoders import ParamStore
from .errors import ConfigError

FORMAT = "wavectrl-checkpoint-v1"


def save_checkpoint(out_dir: str | Path, store: ParamStore, meta: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": FORMAT,
        "meta": meta,
        "params": store.manifest(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    (out / "params.f32").write_bytes(store.to_blob())
    return out


def load_checkpoint(in_dir: str | Path) -> tuple[dict, list[dict], bytes]:
    """Returns (meta, parameter manifest, parameter blob)."""
    src = Path(in_dir)
    mpath = src / "manifest.json"
    if not mpath.is_file():
        raise ConfigError(f"no manifest.json in {src}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("format") != FORMAT:
        raise ConfigError(f"unsupported checkpoint format {manifest.get('format')!r}")
    blob = (src / "params.f32").read_bytes()
    return manifest["meta"], manifest["params"], blob


def restore_params(store: ParamStore, params_manifest: list[dict], blob: bytes) -> None:
    """Load a blob into a freshly built store, validating tensor layout."""
    have = store.manifest()
    if have != params_manifest:
        raise ConfigError(
            "checkpoint parameter layout does not match the rebuilt model; "
            f"checkpoint has {len(params_manifest)} tensors, model has {len(have)}"
        )
    store.from_blob(blob)
