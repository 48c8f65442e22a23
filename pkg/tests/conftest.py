"""Shared fixtures.

Desk-scale artifacts (trained classifier / GAN / encoder) are built once into
DRUMGEN_DESK_DIR (default: <repo>/.desk) by shelling out to the CLI, and
reused on later runs.  Delete the directory to retrain from scratch.
"""

from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent
DESK_DIR = Path(os.environ.get("DRUMGEN_DESK_DIR", REPO / ".desk"))

DATASET_ARGS = ["--per-class", "200", "--data-seed", "1", "--split-seed", "0"]
GAN_STAGE_STEPS = "450,400,320,280,220,180,150"
GAN_FADE_STEPS = "0,200,160,140,110,90,75"


def _cli(*args: str) -> None:
    cmd = [sys.executable, "-m", "drumgen.cli", *args]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=6 * 3600)
    if proc.returncode != 0:
        raise RuntimeError(f"CLI failed ({' '.join(cmd)}):\n{proc.stdout}\n{proc.stderr}")


def ensure_desk_artifacts() -> dict[str, Path]:
    """Train (or reuse) the desk-scale pipeline; returns artifact paths."""
    paths = {
        "classifier": DESK_DIR / "classifier.ckpt",
        "gan": DESK_DIR / "gan" / "gan_final.ckpt",
        "gan_log": DESK_DIR / "gan" / "gan_log.jsonl",
        "encoder": DESK_DIR / "encoder" / "encoder_final.ckpt",
        "encoder_log": DESK_DIR / "encoder" / "encoder_log.json",
    }
    DESK_DIR.mkdir(parents=True, exist_ok=True)
    if not paths["classifier"].exists():
        _cli("train-classifier", *DATASET_ARGS, "--epochs", "20", "--seed", "0", "--out", str(paths["classifier"]))
    if not paths["gan"].exists():
        _cli(
            "train-gan", *DATASET_ARGS, "--classifier", str(paths["classifier"]),
            "--out-dir", str(DESK_DIR / "gan"), "--stage-steps", GAN_STAGE_STEPS,
            "--fade-steps", GAN_FADE_STEPS, "--seed", "0", "--quiet",
        )
    if not paths["encoder"].exists():
        _cli(
            "train-encoder", *DATASET_ARGS, "--classifier", str(paths["classifier"]),
            "--gan", str(paths["gan"]), "--out-dir", str(DESK_DIR / "encoder"),
            "--pairs", "10000", "--param-only-steps", "1200", "--full-loss-steps", "300",
            "--seed", "0", "--quiet",
        )
    return paths


@pytest.fixture(scope="session")
def desk_artifacts() -> dict[str, Path]:
    return ensure_desk_artifacts()


@pytest.fixture(scope="session")
def desk_dataset():
    from drumgen.dataset import SyntheticSpec, load_dataset

    return load_dataset(SyntheticSpec(per_class=200, seed=1), split_seed=0)


@pytest.fixture(scope="session")
def tiny_generator():
    """Full-geometry generator with thin channels, for fast inference tests."""
    import torch

    from drumgen.gan import GeneratorNet

    torch.manual_seed(0)
    return GeneratorNet(channels=(16, 16, 16, 16, 8, 8, 8)).eval()
