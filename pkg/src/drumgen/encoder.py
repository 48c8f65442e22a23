"""Analysis network mapping floored log-magnitude spectrograms to (z, c).

Six stride-2/(2,1) conv layers with channels (32, 64, 128, 128, 64, 32) and
FC sizes (3072, 1024, 512, 131); batch norm after every hidden layer, no
biases, leaky-ReLU activations.  The 131-dim output splits into z (first 128,
no output nonlinearity) and c (last 3, softmax).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .gan import GeneratorNet, INPUT_DIM, LATENT_DIM
from .spectral import DB_REF_MAG, GUARD_DB, LogMagSpectrogram, N_BINS, N_FRAMES, SILENCE_FLOOR_DB

CONV_CHANNELS = (32, 64, 128, 128, 64, 32)
CONV_STRIDES = ((2, 2), (2, 1), (2, 2), (2, 1), (2, 2), (2, 1))
FC_SIZES = (3072, 1024, 512, INPUT_DIM)
LEAKY_SLOPE = 0.2


@dataclass(frozen=True)
class EncoderOutput:
    z_hat: np.ndarray  # 128, unbounded
    c_hat: np.ndarray  # 3, on the simplex


class EncoderNet(nn.Module):
    def __init__(self):
        super().__init__()
        convs = []
        in_ch = 1
        for out_ch, stride in zip(CONV_CHANNELS, CONV_STRIDES):
            convs.append(
                nn.Sequential(
                    nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False),
                    nn.BatchNorm2d(out_ch),
                    nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
                )
            )
            in_ch = out_ch
        self.convs = nn.ModuleList(convs)
        flat = CONV_CHANNELS[-1] * 16 * 6  # 3072
        fcs = []
        in_f = flat
        for width in FC_SIZES[:-1]:
            fcs.append(
                nn.Sequential(
                    nn.Linear(in_f, width, bias=False),
                    nn.BatchNorm1d(width),
                    nn.LeakyReLU(LEAKY_SLOPE, inplace=True),
                )
            )
            in_f = width
        self.fcs = nn.ModuleList(fcs)
        # output layer: raw linear; softmax applied to the last 3 entries only
        self.out = nn.Linear(in_f, FC_SIZES[-1], bias=False)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if tuple(x.shape[-3:]) != (1, N_BINS, N_FRAMES):
            raise ValueError(f"shape mismatch: expected (1, {N_BINS}, {N_FRAMES}), got {tuple(x.shape[-3:])}")
        h = x
        for conv in self.convs:
            h = conv(h)
        h = h.flatten(1)
        for fc in self.fcs:
            h = fc(h)
        params = self.out(h)
        z_hat = params[:, :LATENT_DIM]
        c_hat = torch.softmax(params[:, LATENT_DIM:], dim=1)
        return z_hat, c_hat

    def shape_ladder(self) -> tuple[list[tuple[int, int, int]], list[int]]:
        """Intermediate tensor sizes: conv outputs measured on a dummy forward, FC widths."""
        conv_shapes = []
        was_training = self.training
        self.eval()
        h = torch.zeros(1, 1, N_BINS, N_FRAMES)
        with torch.no_grad():
            for conv in self.convs:
                h = conv(h)
                conv_shapes.append(tuple(h.shape[1:]))
        self.train(was_training)
        fc_sizes = [fc[0].out_features for fc in self.fcs] + [self.out.out_features]
        return conv_shapes, fc_sizes


def encode(net: EncoderNet, logmag: LogMagSpectrogram) -> EncoderOutput:
    """Deterministic inference on a single floored log-magnitude spectrogram."""
    net.eval()
    x = torch.from_numpy(np.array(logmag.data, dtype=np.float32))[None]
    with torch.no_grad():
        z_hat, c_hat = net(x)
    return EncoderOutput(z_hat[0].double().numpy(), c_hat[0].double().numpy())


def encode_batch(net: EncoderNet, logmags: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    net.eval()
    with torch.no_grad():
        z_hat, c_hat = net(torch.from_numpy(np.asarray(logmags, dtype=np.float32)))
    return z_hat.double().numpy(), c_hat.double().numpy()


def floored_logmag(spec: torch.Tensor, floor_db: float = SILENCE_FLOOR_DB) -> torch.Tensor:
    """Differentiable log-magnitude (dB) of a (B, 2, F, T) spectrogram batch, floored.

    The 1e-12 epsilon inside the square root corresponds to about -66 dB, far
    below the -1.5 dB floor, so floored values match the numpy pipeline.
    """
    mag = torch.sqrt(spec[:, 0] ** 2 + spec[:, 1] ** 2 + 1e-12)
    db = 20.0 * torch.log10(torch.clamp(mag / DB_REF_MAG, min=10.0 ** (GUARD_DB / 20.0)))
    return torch.clamp(db, min=floor_db)[:, None]


def encoder_loss_terms(
    z: torch.Tensor,
    c: torch.Tensor,
    z_hat: torch.Tensor,
    c_hat: torch.Tensor,
    target_logmag: torch.Tensor,
    generator: GeneratorNet,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(parameter MSE over 131 dims, spectral MSE over floored log-magnitudes)."""
    param_mse = F.mse_loss(torch.cat([z_hat, c_hat], dim=1), torch.cat([z, c], dim=1))
    recon = floored_logmag(generator(z_hat, c_hat))
    spec_mse = F.mse_loss(recon, target_logmag)
    return param_mse, spec_mse


def encoder_loss(
    z: torch.Tensor,
    c: torch.Tensor,
    z_hat: torch.Tensor,
    c_hat: torch.Tensor,
    generator: GeneratorNet,
    alpha: float = 1.0,
    beta: float = 3.0,
) -> torch.Tensor:
    """alpha * MSE((z_hat, c_hat), (z, c)) + beta * MSE over floored log-magnitude renders."""
    generator.eval()
    target = floored_logmag(generator(z, c))
    param_mse, spec_mse = encoder_loss_terms(z, c, z_hat, c_hat, target, generator)
    return alpha * param_mse + beta * spec_mse


@dataclass(frozen=True)
class EncoderPairs:
    """Fixed training set: latent/condition targets plus provenance."""

    z: np.ndarray  # (n, 128) float32
    c: np.ndarray  # (n, 3) float32
    seed: int
    generator_fingerprint: str
    classifier_fingerprint: str
    floor_db: float = SILENCE_FLOOR_DB

    def __len__(self) -> int:
        return len(self.z)

    def meta(self) -> dict:
        return {
            "n": len(self.z),
            "seed": self.seed,
            "generator_fingerprint": self.generator_fingerprint,
            "classifier_fingerprint": self.classifier_fingerprint,
            "floor_db": self.floor_db,
        }


def build_encoder_training_set(generator, classifier, real_clips, n: int, seed: int = 0) -> EncoderPairs:
    """z ~ N(0, I); c = classifier soft label of a randomly drawn real clip.

    Inputs are derived on demand as threshold_floor(log_magnitude(G(z, c)));
    only (z, c) and provenance are stored.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not real_clips:
        raise ValueError("need at least one real clip for soft-label sampling")
    gen = torch.Generator().manual_seed(seed)
    z = torch.randn(n, LATENT_DIM, generator=gen).numpy().astype(np.float32)
    labels = classifier.predict_soft_labels_batch(list(real_clips))
    picks = np.random.default_rng(seed).integers(0, len(real_clips), size=n)
    c = labels[picks].astype(np.float32)
    from .persist import fingerprint_state  # local import to avoid cycle at module load

    return EncoderPairs(
        z=z,
        c=c,
        seed=seed,
        generator_fingerprint=fingerprint_state(generator.state_dict()),
        classifier_fingerprint=classifier.fingerprint,
    )


def save_pairs(path: str | Path, pairs: EncoderPairs) -> None:
    """Deterministic on-disk form: params .npy plus a .json sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path, np.concatenate([pairs.z, pairs.c], axis=1))
    path.with_suffix(".json").write_text(json.dumps(pairs.meta(), indent=0))


def load_pairs(path: str | Path) -> EncoderPairs:
    path = Path(path)
    params = np.load(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    return EncoderPairs(
        z=params[:, :LATENT_DIM].astype(np.float32),
        c=params[:, LATENT_DIM:].astype(np.float32),
        seed=int(meta["seed"]),
        generator_fingerprint=meta["generator_fingerprint"],
        classifier_fingerprint=meta["classifier_fingerprint"],
        floor_db=float(meta["floor_db"]),
    )


@dataclass
class EncoderTrainConfig:
    lr: float = 1e-4
    batch_size: int = 28
    loss_alpha: float = 1.0
    loss_beta: float = 3.0
    param_only_steps: int = 1200
    full_loss_steps: int = 300
    heldout_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size <= 0:
            raise ValueError("lr and batch size must be positive")
        if not 0.0 < self.heldout_fraction < 0.5:
            raise ValueError("heldout_fraction must be in (0, 0.5)")


class PairInputServer:
    """Serves floored log-magnitude inputs for pairs, with an optional fp16 disk cache."""

    def __init__(self, generator: GeneratorNet, pairs: EncoderPairs, cache_path: str | Path | None = None, batch: int = 56):
        self.generator = generator.eval()
        self.pairs = pairs
        self.batch = batch
        self._cache = None
        if cache_path is not None:
            cache_path = Path(cache_path)
            shape = (len(pairs), 1, N_BINS, N_FRAMES)
            expected_bytes = int(np.prod(shape)) * 2
            if not (cache_path.exists() and cache_path.stat().st_size == expected_bytes):
                self._build_cache(cache_path, shape)
            self._cache = np.memmap(cache_path, dtype=np.float16, mode="r", shape=shape)

    def _build_cache(self, path: Path, shape: tuple) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        mm = np.memmap(path, dtype=np.float16, mode="w+", shape=shape)
        for start in range(0, len(self.pairs), self.batch):
            sl = slice(start, min(start + self.batch, len(self.pairs)))
            mm[sl] = self._compute(sl).numpy().astype(np.float16)
        mm.flush()
        del mm

    def _compute(self, sl: slice | np.ndarray) -> torch.Tensor:
        z = torch.from_numpy(self.pairs.z[sl])
        c = torch.from_numpy(self.pairs.c[sl])
        with torch.no_grad():
            return floored_logmag(self.generator(z, c), self.pairs.floor_db)

    def inputs(self, idx: np.ndarray) -> torch.Tensor:
        if self._cache is not None:
            return torch.from_numpy(np.ascontiguousarray(self._cache[idx], dtype=np.float32))
        return self._compute(idx).float()


def train_encoder(
    pairs: EncoderPairs,
    generator: GeneratorNet,
    cfg: EncoderTrainConfig | None = None,
    input_cache: str | Path | None = None,
    progress: bool = False,
) -> tuple[EncoderNet, dict]:
    """Train E on fixed (z, c) pairs against the frozen generator.

    Phase 1 fits the parameter term only (cheap, no generator gradients);
    phase 2 optimizes the full loss.  The held-out loss is always the full
    alpha/beta-weighted objective.
    """
    cfg = cfg or EncoderTrainConfig()
    generator.eval()
    for p in generator.parameters():
        p.requires_grad_(False)

    torch.manual_seed(cfg.seed)
    net = EncoderNet()
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    n_held = max(2, int(len(pairs) * cfg.heldout_fraction))
    train_idx = np.arange(len(pairs) - n_held)
    held_idx = np.arange(len(pairs) - n_held, len(pairs))
    server = PairInputServer(generator, pairs, cache_path=input_cache)

    def heldout_loss() -> tuple[float, float, float]:
        net.eval()
        totals = np.zeros(2)
        with torch.no_grad():
            for start in range(0, len(held_idx), cfg.batch_size):
                idx = held_idx[start : start + cfg.batch_size]
                x = server.inputs(idx)
                z = torch.from_numpy(pairs.z[idx])
                c = torch.from_numpy(pairs.c[idx])
                z_hat, c_hat = net(x)
                p_mse, s_mse = encoder_loss_terms(z, c, z_hat, c_hat, x, generator)
                totals += np.array([p_mse.item(), s_mse.item()]) * len(idx)
        p_mse, s_mse = totals / len(held_idx)
        return cfg.loss_alpha * p_mse + cfg.loss_beta * s_mse, p_mse, s_mse

    log: dict = {"config": asdict(cfg), "steps": [], "heldout": []}
    l0, p0, s0 = heldout_loss()
    log["heldout"].append({"step": 0, "loss": l0, "param_mse": p0, "spec_mse": s0})

    step = 0
    total_steps = cfg.param_only_steps + cfg.full_loss_steps
    order = rng.permutation(len(train_idx))
    cursor = 0
    while step < total_steps:
        if cursor + cfg.batch_size > len(train_idx):
            order = rng.permutation(len(train_idx))
            cursor = 0
        idx = train_idx[order[cursor : cursor + cfg.batch_size]]
        cursor += cfg.batch_size
        net.train()
        x = server.inputs(idx)
        z = torch.from_numpy(pairs.z[idx])
        c = torch.from_numpy(pairs.c[idx])
        opt.zero_grad()
        z_hat, c_hat = net(x)
        param_mse = F.mse_loss(torch.cat([z_hat, c_hat], dim=1), torch.cat([z, c], dim=1))
        if step < cfg.param_only_steps:
            loss = cfg.loss_alpha * param_mse
            spec_val = float("nan")
        else:
            recon = floored_logmag(generator(z_hat, c_hat), pairs.floor_db)
            spec_mse = F.mse_loss(recon, x)
            loss = cfg.loss_alpha * param_mse + cfg.loss_beta * spec_mse
            spec_val = spec_mse.item()
        if not torch.isfinite(loss):
            raise RuntimeError(f"encoder training diverged: loss={loss.item()} at step {step}")
        loss.backward()
        opt.step()
        log["steps"].append({"step": step, "loss": loss.item(), "param_mse": param_mse.item(), "spec_mse": spec_val})
        if progress and step % 50 == 0:
            print(f"[encoder] step {step}/{total_steps} loss {loss.item():.4f}", flush=True)
        step += 1

    l1, p1, s1 = heldout_loss()
    log["heldout"].append({"step": step, "loss": l1, "param_mse": p1, "spec_mse": s1})
    log["improvement"] = l0 / max(l1, 1e-12)
    return net, log
