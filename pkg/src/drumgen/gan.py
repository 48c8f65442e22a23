"""Progressive conditional generator and critic on complex spectrograms.

The resolution ladder mirrors the encoder's downsampling in reverse:
(16,6) -> (32,6) -> (64,12) -> (128,12) -> (256,24) -> (512,24) -> (1024,48),
alternating frequency-only x2 and frequency+time x2 upsampling.  Training
uses the WGAN-GP objective plus a mean-squared auxiliary loss on the critic's
condition prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import torch
from torch import nn
from torch.nn import functional as F

LATENT_DIM = 128
COND_DIM = 3
INPUT_DIM = LATENT_DIM + COND_DIM  # 131

FINAL_RESOLUTION = (1024, 48)
DEFAULT_RESOLUTIONS = ((16, 6), (32, 6), (64, 12), (128, 12), (256, 24), (512, 24), (1024, 48))
DEFAULT_CHANNELS = (256, 128, 128, 64, 64, 32, 32)


@dataclass(frozen=True)
class ResolutionSchedule:
    """Ordered (freq_bins, time_frames) stages ending at (1024, 48)."""

    stages: tuple[tuple[int, int], ...] = DEFAULT_RESOLUTIONS

    def __post_init__(self):
        if tuple(self.stages[-1]) != FINAL_RESOLUTION:
            raise ValueError(f"final stage must be {FINAL_RESOLUTION}, got {self.stages[-1]}")
        for (f0, t0), (f1, t1) in zip(self.stages, self.stages[1:]):
            if f1 // f0 not in (1, 2) or t1 // t0 not in (1, 2) or f1 % f0 or t1 % t0:
                raise ValueError(f"stage ({f0},{t0}) must divide ({f1},{t1}) by 1 or 2 per axis")

    def __len__(self) -> int:
        return len(self.stages)

    def factor(self, stage: int) -> tuple[int, int]:
        """Upsampling factor from stage-1 to stage."""
        f0, t0 = self.stages[stage - 1]
        f1, t1 = self.stages[stage]
        return (f1 // f0, t1 // t0)


@dataclass(frozen=True)
class GrowthState:
    """Position in the progressive schedule."""

    stage_index: int = 0
    step_in_stage: int = 0
    fade_alpha: float = 1.0


@dataclass(frozen=True)
class GrowthPlan:
    """Per-stage step budgets and fade-in lengths."""

    stage_steps: tuple[int, ...]
    fade_steps: tuple[int, ...]

    def __post_init__(self):
        if len(self.stage_steps) != len(self.fade_steps):
            raise ValueError("stage_steps and fade_steps must have equal length")
        if any(s <= 0 for s in self.stage_steps) or any(f < 0 for f in self.fade_steps):
            raise ValueError("stage lengths must be positive and fade lengths nonnegative")
        for steps, fade in zip(self.stage_steps, self.fade_steps):
            if fade > steps:
                raise ValueError("fade length cannot exceed stage length")

    def alpha(self, stage: int, step_in_stage: int) -> float:
        if stage == 0 or self.fade_steps[stage] == 0:
            return 1.0  # nothing to fade from
        return min(1.0, step_in_stage / self.fade_steps[stage])

    def fresh_state(self) -> GrowthState:
        return GrowthState(0, 0, self.alpha(0, 0))

    def total_steps(self) -> int:
        return sum(self.stage_steps)


def advance_growth(plan: GrowthPlan, state: GrowthState, steps: int) -> GrowthState:
    """Move forward `steps` training steps; saturates at (last stage, alpha=1)."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    stage, pos = state.stage_index, state.step_in_stage
    last = len(plan.stage_steps) - 1
    remaining = steps
    while remaining > 0 and stage < last:
        take = min(remaining, plan.stage_steps[stage] - pos)
        pos += take
        remaining -= take
        if pos >= plan.stage_steps[stage]:
            stage += 1
            pos = 0
    if stage == last:
        pos = min(pos + remaining, plan.stage_steps[last])
    return GrowthState(stage, pos, plan.alpha(stage, pos))


def _gen_block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.LeakyReLU(0.2, inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.LeakyReLU(0.2, inplace=True),
    )


class GeneratorNet(nn.Module):
    """Maps (z, c) to a complex spectrogram at any schedule stage.

    The condition vector is concatenated to z at the input and re-injected as
    constant spatial channels at every block, so class control survives the
    deep upsampling ladder.
    """

    def __init__(self, schedule: ResolutionSchedule | None = None, channels: tuple[int, ...] = DEFAULT_CHANNELS):
        super().__init__()
        self.schedule = schedule or ResolutionSchedule()
        if len(channels) != len(self.schedule):
            raise ValueError("one channel width per schedule stage required")
        self.channels = tuple(channels)
        f0, t0 = self.schedule.stages[0]
        self.base_shape = (channels[0], f0, t0)
        self.input_fc = nn.Linear(INPUT_DIM, channels[0] * f0 * t0)
        self.stem = _gen_block(channels[0] + COND_DIM, channels[0])
        self.blocks = nn.ModuleList(
            [_gen_block(channels[i - 1] + COND_DIM, channels[i]) for i in range(1, len(channels))]
        )
        self.heads = nn.ModuleList([nn.Conv2d(ch, 2, 1) for ch in channels])

    @staticmethod
    def _with_condition(h: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
        tile = c[:, :, None, None].expand(-1, -1, h.shape[-2], h.shape[-1])
        return torch.cat([h, tile], dim=1)

    def forward(self, z: torch.Tensor, c: torch.Tensor, stage: int | None = None, alpha: float = 1.0) -> torch.Tensor:
        if stage is None:
            stage = len(self.schedule) - 1
        if z.shape[-1] != LATENT_DIM or c.shape[-1] != COND_DIM:
            raise ValueError(
                f"dimension mismatch: expected z[{LATENT_DIM}] and c[{COND_DIM}], got z[{z.shape[-1]}], c[{c.shape[-1]}]"
            )
        x = torch.cat([z, c], dim=-1)
        h = F.leaky_relu(self.input_fc(x), 0.2).view(-1, *self.base_shape)
        h = self.stem(self._with_condition(h, c))
        prev = h
        for i in range(1, stage + 1):
            prev = h
            up = F.interpolate(h, scale_factor=self.schedule.factor(i), mode="nearest")
            h = self.blocks[i - 1](self._with_condition(up, c))
        out = self.heads[stage](h)
        if stage > 0 and alpha < 1.0:
            old = F.interpolate(self.heads[stage - 1](prev), scale_factor=self.schedule.factor(stage), mode="nearest")
            out = (1.0 - alpha) * old + alpha * out
        return out


class CriticOutput(NamedTuple):
    score: torch.Tensor
    c_hat: torch.Tensor


class CriticNet(nn.Module):
    """Wasserstein critic with a 3-dim condition-prediction head."""

    def __init__(self, schedule: ResolutionSchedule | None = None, channels: tuple[int, ...] = DEFAULT_CHANNELS):
        super().__init__()
        self.schedule = schedule or ResolutionSchedule()
        if len(channels) != len(self.schedule):
            raise ValueError("one channel width per schedule stage required")
        self.channels = tuple(channels)
        self.from_spec = nn.ModuleList([nn.Conv2d(2, ch, 1) for ch in channels])
        self.blocks = nn.ModuleList()
        for i in range(1, len(channels)):
            self.blocks.append(
                nn.Sequential(
                    nn.Conv2d(channels[i], channels[i], 3, padding=1),
                    nn.LeakyReLU(0.2, inplace=True),
                    nn.Conv2d(channels[i], channels[i - 1], 3, padding=1),
                    nn.LeakyReLU(0.2, inplace=True),
                )
            )
        f0, t0 = self.schedule.stages[0]
        self.final_conv = nn.Sequential(nn.Conv2d(channels[0], channels[0], 3, padding=1), nn.LeakyReLU(0.2, inplace=True))
        self.fc = nn.Sequential(nn.Linear(channels[0] * f0 * t0, 256), nn.LeakyReLU(0.2, inplace=True))
        self.head = nn.Linear(256, 1 + COND_DIM)

    def forward(self, spec: torch.Tensor, stage: int | None = None, alpha: float = 1.0) -> CriticOutput:
        if stage is None:
            stage = len(self.schedule) - 1
        expected = self.schedule.stages[stage]
        if tuple(spec.shape[-2:]) != tuple(expected):
            raise ValueError(f"shape mismatch: stage {stage} expects {expected}, got {tuple(spec.shape[-2:])}")
        h = F.leaky_relu(self.from_spec[stage](spec), 0.2)
        if stage > 0:
            factor = self.schedule.factor(stage)
            h = F.avg_pool2d(self.blocks[stage - 1](h), factor)
            if alpha < 1.0:
                skip = F.leaky_relu(self.from_spec[stage - 1](F.avg_pool2d(spec, factor)), 0.2)
                h = (1.0 - alpha) * skip + alpha * h
            for i in range(stage - 1, 0, -1):
                h = F.avg_pool2d(self.blocks[i - 1](h), self.schedule.factor(i))
        h = self.final_conv(h).flatten(1)
        out = self.head(self.fc(h))
        return CriticOutput(score=out[:, 0], c_hat=out[:, 1:])


def sample_latent(n: int, seed: int | None = None, generator: torch.Generator | None = None) -> torch.Tensor:
    """n i.i.d. standard-normal latent vectors, deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if generator is None:
        generator = torch.Generator()
        if seed is not None:
            generator.manual_seed(seed)
    return torch.randn(n, LATENT_DIM, generator=generator)


def gradient_penalty(
    critic_fn: Callable[[torch.Tensor], torch.Tensor],
    real: torch.Tensor,
    fake: torch.Tensor,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Mean (||grad D(x_hat)||_2 - 1)^2 at random convex interpolates."""
    if real.shape != fake.shape:
        raise ValueError(f"batch shape mismatch: {tuple(real.shape)} vs {tuple(fake.shape)}")
    eps_shape = (real.shape[0],) + (1,) * (real.dim() - 1)
    eps = torch.rand(eps_shape, generator=generator, dtype=real.dtype)
    x_hat = (eps * real + (1.0 - eps) * fake).detach().requires_grad_(True)
    scores = critic_fn(x_hat)
    grads = torch.autograd.grad(scores.sum(), x_hat, create_graph=True)[0]
    norms = grads.flatten(1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def aux_condition_loss(c_hat: torch.Tensor, c: torch.Tensor) -> torch.Tensor:
    """Mean squared error between predicted and target condition vectors."""
    if c_hat.shape[-1] != COND_DIM or c.shape[-1] != COND_DIM:
        raise ValueError("condition vectors must have 3 entries")
    return F.mse_loss(c_hat, c)


def resize_to_stage(spec: torch.Tensor, schedule: ResolutionSchedule, stage: int) -> torch.Tensor:
    """Average-pool full-resolution spectrograms down to a stage's resolution."""
    f, t = schedule.stages[stage]
    ff, tt = schedule.stages[-1]
    if (ff, tt) == (f, t):
        return spec
    return F.avg_pool2d(spec, (ff // f, tt // t))
