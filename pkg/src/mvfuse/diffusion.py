"""Toy denoising schedule, forward noising, and the pluggable predictor.

The scheduler follows the standard cumulative-product formulation:

    x_t = sqrt(abar_t) * x_0 + sqrt(1 - abar_t) * eps,
    abar_t = prod_{s<=t} (1 - beta_s)

with a linear or cosine beta schedule. The bundled predictor returns the
analytic noise estimate toward per-view target planes, standing in for a
learned model so the surrounding machinery can be exercised and verified
deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigError, InvalidInputError
from .projection import FeatureImage

# purpose tags for seed derivation (documented splitting rule)
SEED_INIT = 1
SEED_RENOISE = 2
SEED_PERTURB = 3


def subseed(master: int, *parts: int) -> int:
    """Derive a sub-seed from (master, purpose, step, view, ...).

    Uses numpy's SeedSequence over the integer tuple, so streams are
    stable across runs and platforms.
    """
    seq = np.random.SeedSequence([int(master)] + [int(p) for p in parts])
    return int(seq.generate_state(1, np.uint64)[0])


def rng_for(master: int, *parts: int) -> np.random.Generator:
    return np.random.default_rng(subseed(master, *parts))


@dataclass
class NoiseSchedule:
    """Beta schedule with cached cumulative signal coefficients."""

    betas: np.ndarray

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=np.float64)
        if self.betas.ndim != 1 or len(self.betas) < 2:
            raise ConfigError("schedule needs at least 2 steps")
        if self.betas.min() <= 0.0 or self.betas.max() >= 1.0:
            raise ConfigError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(self.betas) < 0):
            raise ConfigError("betas must be non-decreasing")
        self.signal = np.cumprod(1.0 - self.betas)

    @property
    def steps(self) -> int:
        return len(self.betas)

    def signal_at(self, t: int) -> float:
        """Cumulative signal coefficient abar_t; t = 0 is the identity limit."""
        if t == 0:
            return 1.0
        if not 1 <= t <= self.steps:
            raise InvalidInputError(f"step {t} outside [0, {self.steps}]")
        return float(self.signal[t - 1])


def build_schedule(steps: int, kind: str = "linear") -> NoiseSchedule:
    """Linear or cosine beta schedule over `steps` steps.

    Linear endpoints (1e-4, 0.02) are scaled by 1000/steps and clipped
    below 0.999, so short schedules still drive the terminal signal
    coefficient toward zero. Cosine uses the squared-cosine signal curve
    with offset 0.008.
    """
    if steps < 2:
        raise ConfigError("steps must be >= 2")
    if kind == "linear":
        scale = 1000.0 / steps
        betas = np.minimum(np.linspace(1e-4 * scale, 0.02 * scale, steps), 0.999)
    elif kind == "cosine":
        s = 0.008
        ts = np.arange(steps + 1) / steps
        abar = np.cos((ts + s) / (1 + s) * np.pi / 2.0) ** 2
        abar /= abar[0]
        betas = np.clip(1.0 - abar[1:] / abar[:-1], 1e-8, 0.999)
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(betas)


def forward_noise(
    x0: FeatureImage, t: int, schedule: NoiseSchedule, seed: int
) -> FeatureImage:
    """Jump the clean plane to noise level t with seeded Gaussian noise."""
    abar = schedule.signal_at(t)
    if t == 0:
        return FeatureImage(x0.data.copy(), x0.foreground)
    eps = np.random.default_rng(seed).standard_normal(x0.data.shape)
    data = np.sqrt(abar) * x0.data + np.sqrt(1.0 - abar) * eps
    return FeatureImage(data, x0.foreground)


class NoisePredictor(Protocol):
    """Per-view noise prediction interface.

    Called with the current noisy latents (one (H, W, C) array per view),
    the schedule step t, and optional per-view conditioning planes such
    as rendered depth; returns one predicted-noise array per view with
    the input shapes. Implementations must be deterministic given their
    construction-time seed.
    """

    def __call__(
        self,
        latents: Sequence[np.ndarray],
        t: int,
        cond: Sequence[np.ndarray] | None = None,
    ) -> list[np.ndarray]: ...


def low_frequency_field(shape: tuple[int, int, int], seed: int, cells: int = 4) -> np.ndarray:
    """Smooth seeded field: coarse Gaussian grid upsampled bilinearly."""
    h, w, c = shape
    rng = np.random.default_rng(seed)
    coarse = rng.standard_normal((cells, cells, c))
    return ndimage.zoom(coarse, (h / cells, w / cells, 1.0), order=1)


class ToyPredictor:
    """Analytic noise estimate toward fixed per-view targets.

    eps_hat = (x_t - sqrt(abar_t) * target) / sqrt(1 - abar_t), so every
    denoising step recovers the target exactly. `perturbation` adds a
    seeded low-frequency field per view to its target, creating
    controlled cross-view disagreement. `memory` > 0 switches to the
    posterior-mean denoiser for a Gaussian prior with std `memory`
    centered on the target:

        x0_hat = (sqrt(abar) * m^2 * x_t + (1 - abar) * target)
                 / (abar * m^2 + 1 - abar)

    which trusts the latent more as abar -> 1, letting earlier fusion
    history persist through the unfused tail of the run.
    """

    def __init__(
        self,
        targets: Sequence[FeatureImage],
        schedule: NoiseSchedule,
        perturbation: float = 0.0,
        memory: float = 0.0,
        seed: int = 0,
    ):
        if not targets:
            raise InvalidInputError("need at least one target view")
        self.schedule = schedule
        self.memory = float(memory)
        self.targets = []
        for n, tgt in enumerate(targets):
            data = tgt.data.astype(np.float64)
            if perturbation != 0.0:
                field = low_frequency_field(data.shape, subseed(seed, SEED_PERTURB, n))
                data = data + perturbation * field
            self.targets.append(data)

    def __call__(
        self,
        latents: Sequence[np.ndarray],
        t: int,
        cond: Sequence[np.ndarray] | None = None,
    ) -> list[np.ndarray]:
        if len(latents) != len(self.targets):
            raise InvalidInputError("latent count does not match target count")
        abar = self.schedule.signal_at(t)
        sa = np.sqrt(abar)
        sn = np.sqrt(1.0 - abar)
        out = []
        for x, tgt in zip(latents, self.targets):
            if self.memory > 0.0:
                m2 = self.memory**2
                want = (sa * m2 * x + (1.0 - abar) * tgt) / (abar * m2 + 1.0 - abar)
            else:
                want = tgt
            out.append((x - sa * want) / sn)
        return out
