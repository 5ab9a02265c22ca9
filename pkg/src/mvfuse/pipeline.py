"""Collaborative denoising driver.

Runs the reverse loop t = T..1: predict noise per view (optionally mixed
through the joint 2D/3D attention branches), form the clean estimate,
fuse it across views (back-project, aggregate, re-rasterize, variance
align), then re-noise to step t-1. Fusion is active only for the leading
fraction of steps; the tail is pure per-view denoising. Per-step
foreground standard deviations are recorded so the variance trajectories
of the three policies (baseline / fusion without alignment / fusion with
alignment) can be compared.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .attention import grid_size_for_step, joint_noise_prediction
from .camera import Camera
from .diffusion import (
    SEED_INIT,
    SEED_RENOISE,
    NoisePredictor,
    NoiseSchedule,
    build_schedule,
    forward_noise,
    subseed,
)
from .errors import InvalidInputError, PipelineError
from .fusion import (
    AggregatedMesh,
    VertexBank,
    aggregate_views,
    estimate_variance_stats,
    estimate_variance_stats_pooled,
    rasterize_back,
    variance_align,
)
from .mesh import Mesh
from .projection import FeatureImage, back_project, compute_scores
from .raster import FragmentBuffer, rasterize

POLICIES = ("baseline", "mvar", "mvar_va")


@dataclass
class DenoisingConfig:
    """Knobs of the collaborative loop; defaults are the paper-scale ones."""

    steps: int = 50
    schedule_kind: str = "linear"
    fusion_fraction: float = 0.9
    tau_b: float = 2.0
    tau_d: float = 2.0
    tau_w: float = 3.0
    z_far: float = 5.0
    grid_sizes: tuple[float, float] = (0.34, 0.25)
    jnp: bool = True
    attention_temperature: float | None = None
    latent_size: int = 32
    channels: int = 4
    seed: int = 0
    pooled_va: bool = False
    fuse_renoised: bool = False

    @property
    def fusion_steps(self) -> int:
        return math.ceil(self.fusion_fraction * self.steps)


@dataclass
class TrajectoryRecord:
    step: int                      # executed step index, 1-based
    t: int                         # schedule timestep
    policy: str
    fused: bool
    std_pre: np.ndarray            # (C,) per-channel foreground std before fusion
    std_post_raster: np.ndarray    # after re-rasterization (== pre when unfused)
    std_post_va: np.ndarray        # after variance alignment (== raster w/o VA)


@dataclass
class TrajectoryLog:
    records: list[TrajectoryRecord] = field(default_factory=list)

    def append(self, record: TrajectoryRecord) -> None:
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        """Scalar per-step series: channel-mean of the named std field."""
        return np.array([float(np.mean(getattr(r, name))) for r in self.records])

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "policy", "std_pre", "std_post_raster", "std_post_va"])
            for r in self.records:
                writer.writerow(
                    [
                        r.step,
                        r.policy,
                        repr(float(np.mean(r.std_pre))),
                        repr(float(np.mean(r.std_post_raster))),
                        repr(float(np.mean(r.std_post_va))),
                    ]
                )


@dataclass
class DenoisingResult:
    latents: list[FeatureImage]
    aggregated: AggregatedMesh
    trajectory: TrajectoryLog
    policy: str
    variance_rows: list[dict]


def prepare_views(mesh: Mesh, cameras: Sequence[Camera], z_far: float):
    """Rasterize every camera once and derive score maps (geometry is static)."""
    frags = [rasterize(mesh, cam) for cam in cameras]
    scores = [compute_scores(mesh, cam, frag, z_far) for cam, frag in zip(cameras, frags)]
    return frags, scores


def foreground_std(planes: Sequence[np.ndarray], frags: Sequence[FragmentBuffer]) -> np.ndarray:
    """Per-channel foreground std, averaged over views with foreground."""
    per_view = [
        plane[frag.foreground].std(axis=0)
        for plane, frag in zip(planes, frags)
        if frag.foreground.sum() >= 2
    ]
    if not per_view:
        return np.zeros(planes[0].shape[-1] if planes else 0)
    return np.mean(per_view, axis=0)


def run_collaborative_denoising(
    mesh: Mesh,
    cameras: Sequence[Camera],
    predictor: NoisePredictor,
    config: DenoisingConfig,
    policy: str = "mvar_va",
    schedule: NoiseSchedule | None = None,
    frags: Sequence[FragmentBuffer] | None = None,
    scores=None,
) -> DenoisingResult:
    """Run the full reverse loop and return latents, texture, and trajectory.

    `policy` selects baseline (no fusion), "mvar" (fusion without variance
    alignment), or "mvar_va". Precomputed `frags`/`scores` may be passed to
    share rasterization across policy runs; results are identical either
    way. The entire run is a pure function of (mesh, cameras, predictor,
    config, policy).
    """
    if policy not in POLICIES:
        raise InvalidInputError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    if schedule is None:
        schedule = build_schedule(config.steps, config.schedule_kind)
    if frags is None or scores is None:
        frags, scores = prepare_views(mesh, cameras, config.z_far)

    n_views = len(cameras)
    h = w = config.latent_size
    shape = (h, w, config.channels)
    for frag in frags:
        if frag.face_index.shape != (h, w):
            raise InvalidInputError("fragment buffers must match the latent resolution")

    depth_cond = [
        np.clip(1.0 - np.where(frag.foreground, frag.depth, config.z_far) / config.z_far, 0.0, 1.0)
        for frag in frags
    ]
    latents = [
        np.random.default_rng(subseed(config.seed, SEED_INIT, n)).standard_normal(shape)
        for n in range(n_views)
    ]

    trajectory = TrajectoryLog()
    variance_rows: list[dict] = []
    prev_features = np.zeros((mesh.vertex_count, config.channels))
    t_steps = range(config.steps, 0, -1)

    for k, t in enumerate(t_steps):
        fused_now = policy != "baseline" and k < config.fusion_steps
        eps = predictor(latents, t, cond=depth_cond)
        if fused_now and config.jnp:
            planes = [FeatureImage(e, frag.foreground) for e, frag in zip(eps, frags)]
            mixed = joint_noise_prediction(
                planes,
                frags,
                mesh,
                grid_size_for_step(k, config.grid_sizes),
                config.attention_temperature,
            )
            eps = [p.data for p in mixed]

        abar = schedule.signal_at(t)
        sa, sn = np.sqrt(abar), np.sqrt(1.0 - abar)
        x0 = [(x - sn * e) / sa for x, e in zip(latents, eps)]

        std_pre = foreground_std(x0, frags)
        std_post_raster = std_pre
        std_post_va = std_pre
        if fused_now and not config.fuse_renoised:
            x0, agg, std_post_raster, std_post_va = _apply_fusion(
                x0, mesh, frags, scores, config, policy, prev_features, t, variance_rows
            )
            prev_features = agg.features

        for n, plane in enumerate(x0):
            if not np.isfinite(plane).all():
                raise PipelineError(f"non-finite latent values at step t={t}, view {n}")

        trajectory.append(
            TrajectoryRecord(k + 1, t, policy, fused_now, std_pre, std_post_raster, std_post_va)
        )

        if t > 1:
            latents = [
                forward_noise(
                    FeatureImage(plane, frag.foreground),
                    t - 1,
                    schedule,
                    subseed(config.seed, SEED_RENOISE, t - 1, n),
                ).data
                for n, (plane, frag) in enumerate(zip(x0, frags))
            ]
            if fused_now and config.fuse_renoised:
                latents, agg, _, _ = _apply_fusion(
                    latents, mesh, frags, scores, config, policy, prev_features, t, variance_rows
                )
                prev_features = agg.features
        else:
            latents = x0

    final_planes = [FeatureImage(x, frag.foreground) for x, frag in zip(latents, frags)]
    bank = VertexBank.from_views(
        [
            back_project(plane, frag, sc, mesh, config.tau_b, config.tau_d)
            for plane, frag, sc in zip(final_planes, frags, scores)
        ]
    )
    aggregated = aggregate_views(bank, config.tau_w, fallback=prev_features)
    return DenoisingResult(final_planes, aggregated, trajectory, policy, variance_rows)


def _apply_fusion(
    planes_data, mesh, frags, scores, config, policy, prev_features, t, variance_rows
):
    """One fusion pass: back-project, aggregate, re-rasterize, optional VA."""
    originals = [FeatureImage(x, frag.foreground) for x, frag in zip(planes_data, frags)]
    bank = VertexBank.from_views(
        [
            back_project(plane, frag, sc, mesh, config.tau_b, config.tau_d)
            for plane, frag, sc in zip(originals, frags, scores)
        ]
    )
    agg = aggregate_views(bank, config.tau_w, fallback=prev_features)
    planes = rasterize_back(agg, mesh, frags, originals)
    std_post_raster = foreground_std([p.data for p in planes], frags)
    std_post_va = std_post_raster
    if policy == "mvar_va":
        if config.pooled_va:
            stats = estimate_variance_stats_pooled(agg, frags, planes, mesh)
            per_view_stats = [stats] * len(planes)
        else:
            per_view_stats = [
                estimate_variance_stats(agg, frag, plane, mesh)
                for frag, plane in zip(frags, planes)
            ]
        planes = [variance_align(p, s) for p, s in zip(planes, per_view_stats)]
        for n, s in enumerate(per_view_stats):
            for ch in range(len(s.std_2d)):
                variance_rows.append(
                    {
                        "step": t,
                        "view": n,
                        "channel": ch,
                        "std_2d": float(s.std_2d[ch]),
                        "std_3d": float(s.std_3d[ch]),
                        "mean_2d": float(s.mean_2d[ch]),
                        "mean_3d": float(s.mean_3d[ch]),
                    }
                )
        std_post_va = foreground_std([p.data for p in planes], frags)
    return [p.data for p in planes], agg, std_post_raster, std_post_va


def run_policy_comparison(
    mesh: Mesh,
    cameras: Sequence[Camera],
    predictor: NoisePredictor,
    config: DenoisingConfig,
) -> dict[str, DenoisingResult]:
    """Run baseline / mvar / mvar_va with identical seeds and shared buffers.

    The attention branch is disabled for all three runs so the policies
    differ only in the fusion treatment and share identical pre-fusion
    states step by step.
    """
    cfg = replace(config, jnp=False)
    schedule = build_schedule(cfg.steps, cfg.schedule_kind)
    frags, scores = prepare_views(mesh, cameras, cfg.z_far)
    return {
        policy: run_collaborative_denoising(
            mesh, cameras, predictor, cfg, policy, schedule, frags, scores
        )
        for policy in POLICIES
    }


def write_comparison_csv(path: str | os.PathLike, results: dict[str, DenoisingResult]) -> None:
    """Three-policy trajectory CSV: one row per step, one column per policy.

    Each column holds the std that feeds the next step: post-alignment
    for mvar_va, post-rasterization for mvar, pre-fusion for baseline.
    """
    columns = {policy: results[policy].trajectory.column("std_post_va") for policy in POLICIES}
    steps = [r.step for r in results[POLICIES[0]].trajectory.records]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", *POLICIES])
        for i, step in enumerate(steps):
            writer.writerow([step] + [repr(float(columns[p][i])) for p in POLICIES])
