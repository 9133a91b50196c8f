"""Checkpoint files: canonical JSON, content hashes, resume safety.

A checkpoint is a single JSON document holding the model snapshot, the
optimizer state, the position in the phase plan where training should
resume, the master seed, and a hash of the run configuration.  Files are
written in canonical form (sorted keys, minimal separators, shortest
round-trip float text), so identical state always produces identical
bytes.

`created_unix_ms` is the one intentionally nondeterministic field; the
fingerprint zeroes it before hashing so two runs of the same seed yield
identical fingerprints.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from typing import Any

from .model import HiPaNModel, model_from_state, model_state

FORMAT = "hipan-checkpoint-v1"


def canonical_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, no whitespace, exact floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict | None) -> str:
    """sha256 over the canonical form of a configuration mapping."""
    return hashlib.sha256(canonical_json(config or {}).encode()).hexdigest()


def checkpoint_fingerprint(doc: dict) -> str:
    """Content hash of a checkpoint with its timestamp zeroed."""
    scrubbed = dict(doc)
    scrubbed["created_unix_ms"] = 0
    return hashlib.sha256(canonical_json(scrubbed).encode()).hexdigest()


def save_checkpoint(
    path: str,
    model: HiPaNModel,
    *,
    optim_state: dict | None = None,
    cursor: dict | None = None,
    seed: int = 0,
    run_config: dict | None = None,
    created_unix_ms: int | None = None,
) -> str:
    """Write a checkpoint document; returns the path written."""
    doc = {
        "format": FORMAT,
        "model": model_state(model),
        "optim": optim_state or {},
        "cursor": cursor or {"phase": 0, "epoch": 0},
        "seed": seed,
        "config_hash": config_hash(run_config) if run_config is not None else None,
        "created_unix_ms": (
            int(time.time() * 1000) if created_unix_ms is None else created_unix_ms
        ),
    }
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(doc))
        fh.write("\n")
    return path


def load_checkpoint(path: str) -> dict:
    """Read and validate a checkpoint document.

    Raises:
        ValueError: not a checkpoint file or an unknown format tag.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not a checkpoint file")
    return doc


def load_model(doc: dict) -> HiPaNModel:
    """Model snapshot out of a loaded checkpoint document."""
    return model_from_state(doc["model"])


def config_matches(doc: dict, run_config: dict | None) -> bool:
    """Whether a resume configuration matches the one the file was trained
    under.  Checkpoints written without a configuration match anything."""
    stored = doc.get("config_hash")
    if stored is None:
        return True
    return stored == config_hash(run_config)


__all__ = [
    "FORMAT",
    "canonical_json",
    "checkpoint_fingerprint",
    "config_hash",
    "config_matches",
    "load_checkpoint",
    "load_model",
    "save_checkpoint",
]
