"""Versioned checkpoint files with kind checking and weight fingerprints."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

import torch

MAGIC = "drumgen-checkpoint"
VERSION = 1


class CheckpointError(RuntimeError):
    """Raised for corrupt, incompatible, or wrongly-typed checkpoint files."""


def fingerprint_state(state_dict: dict[str, torch.Tensor]) -> str:
    """Content hash of a state dict, stable across save/load."""
    h = hashlib.sha256()
    for name in sorted(state_dict):
        h.update(name.encode())
        tensor = state_dict[name]
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()[:16]


def save_checkpoint(path: str | Path, kind: str, payload: dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"magic": MAGIC, "version": VERSION, "kind": kind, "payload": payload}, path)


def load_checkpoint(path: str | Path, expected_kind: str) -> dict[str, Any]:
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"corrupt or unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("magic") != MAGIC:
        raise CheckpointError(f"{path} is not a drumgen checkpoint")
    if blob.get("version") != VERSION:
        raise CheckpointError(f"checkpoint version {blob.get('version')} unsupported (expected {VERSION})")
    if blob.get("kind") != expected_kind:
        raise CheckpointError(f"checkpoint kind mismatch: expected {expected_kind!r}, found {blob.get('kind')!r}")
    return blob["payload"]
