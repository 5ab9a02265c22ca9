"""Command-line surface tying the library into runnable experiments.

Subcommands:
    render            per-view color/depth/view-score PNGs of a mesh
    texture           full collaborative texturing run with refinement
    analyze-variance  three-policy variance trajectories (CSV + plot)
    detect-conflicts  pixel aggregation and conflict mask only

Exit codes: 0 success, 1 pipeline failure, 2 I/O or configuration
failure. All outputs land inside the configured output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .camera import make_camera_ring, make_cameras
from .config import KEY_TO_FIELD, RunConfig, load_config, parse_value
from .diffusion import ToyPredictor, build_schedule
from .errors import ConfigError, InvalidInputError, PipelineError
from .mesh import Mesh, compute_vertex_normals, icosphere, normalize_mesh, subdivide
from .meshio import load_obj, save_ply
from .pipeline import (
    DenoisingConfig,
    run_collaborative_denoising,
    run_policy_comparison,
    write_comparison_csv,
)
from .projection import FeatureImage, compute_scores, render_attributes
from .raster import rasterize
from .refine import (
    HarmonicInpainter,
    build_conflict_mask,
    inpaint_refine,
    pixel_aggregate,
    render_mask_dilated,
    vertex_variance,
)
from .fusion import write_variance_csv
from .synthetic import decode_to_rgb, render_targets, value_field


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        scene = _build_scene(cfg)
    except (ConfigError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "render":
            _cmd_render(cfg, scene, out)
        elif args.command == "texture":
            _cmd_texture(cfg, scene, out)
        elif args.command == "analyze-variance":
            _cmd_analyze_variance(cfg, scene, out)
        elif args.command == "detect-conflicts":
            _cmd_detect_conflicts(cfg, scene, out)
        else:  # pragma: no cover - argparse enforces the choices
            return 2
    except (PipelineError, InvalidInputError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvfuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("render", "texture", "analyze-variance", "detect-conflicts"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        for key, field_name in sorted(KEY_TO_FIELD.items()):
            p.add_argument(
                f"--{key.replace('_', '-')}",
                dest=f"opt_{field_name}",
                default=None,
                metavar="V",
                help=f"override config key {key}",
            )
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for f in fields(RunConfig):
        raw = getattr(args, f"opt_{f.name}", None)
        if raw is not None:
            overrides[f.name] = parse_value(f.name, raw)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()


def _build_scene(cfg: RunConfig):
    """Load/normalize the base mesh and derive the coarse and fine meshes."""
    if cfg.mesh == "sphere":
        base = icosphere(cfg.sphere_level)
    else:
        base = normalize_mesh(load_obj(cfg.mesh))
    base = compute_vertex_normals(base)
    coarse = subdivide(base, cfg.coarse_subdiv)
    fine = subdivide(base, cfg.fine_subdiv)
    return {"base": base, "coarse": coarse, "fine": fine}


def _ring(cfg: RunConfig, resolution: int):
    return make_camera_ring(
        cfg.views,
        cfg.elevation_deg,
        cfg.camera_distance,
        cfg.fov_deg,
        (resolution, resolution),
        spacing_deg=cfg.view_spacing_deg,
    )


def _pixel_cameras(cfg: RunConfig):
    return make_cameras(
        cfg.pixel_views,
        cfg.elevation_deg,
        cfg.camera_distance,
        cfg.fov_deg,
        (cfg.image_size, cfg.image_size),
    )


def _pixel_view_indices(cfg: RunConfig) -> list[int]:
    """Nearest denoising-ring view for each pixel-stage azimuth."""
    ring = [(cfg.view_spacing_deg * i) % 360.0 for i in range(cfg.views)]
    picks = []
    for az in cfg.pixel_views:
        diffs = [min(abs(az - r) % 360.0, 360.0 - abs(az - r) % 360.0) for r in ring]
        picks.append(int(np.argmin(diffs)))
    return picks


def _denoising_config(cfg: RunConfig) -> DenoisingConfig:
    return DenoisingConfig(
        steps=cfg.steps,
        schedule_kind=cfg.schedule_kind,
        fusion_fraction=cfg.fusion_fraction,
        tau_b=cfg.tau_b,
        tau_d=cfg.tau_d,
        tau_w=cfg.tau_w,
        z_far=cfg.z_far,
        grid_sizes=tuple(cfg.grid_sizes),
        jnp=cfg.jnp,
        latent_size=cfg.latent_size,
        channels=cfg.channels,
        seed=cfg.seed,
        pooled_va=cfg.pooled_va,
        fuse_renoised=cfg.fuse_renoised,
    )


def _save_png(path: Path, array: np.ndarray) -> None:
    from PIL import Image

    arr = np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0)
    Image.fromarray(np.rint(arr * 255.0).astype(np.uint8)).save(path)


def _cmd_render(cfg: RunConfig, scene, out: Path) -> None:
    mesh = scene["fine"]
    cameras = _ring(cfg, cfg.image_size)
    for n, cam in enumerate(cameras):
        frag = rasterize(mesh, cam)
        sc = compute_scores(mesh, cam, frag, cfg.z_far)
        if mesh.attributes is not None and mesh.attributes.shape[1] >= 3:
            color = render_attributes(mesh, frag).data[:, :, :3]
        else:
            color = render_attributes(mesh, frag, (mesh.normals + 1.0) / 2.0).data
        color[~frag.foreground] = 0.0
        depth = np.where(
            frag.foreground, np.clip(1.0 - frag.depth / cfg.z_far, 0.0, 1.0), 0.0
        )
        score = np.clip(sc.view_score, 0.0, 1.0)
        _save_png(out / f"color_{n:02d}.png", color)
        _save_png(out / f"depth_{n:02d}.png", depth)
        _save_png(out / f"score_{n:02d}.png", score)


def _run_latent_stage(cfg: RunConfig, scene):
    coarse = scene["coarse"]
    cameras = _ring(cfg, cfg.latent_size)
    frags = [rasterize(coarse, cam) for cam in cameras]
    field = value_field(cfg.target, cfg.channels, cfg.seed)
    targets = render_targets(coarse, frags, field)
    schedule = build_schedule(cfg.steps, cfg.schedule_kind)
    predictor = ToyPredictor(
        targets, schedule, cfg.perturbation, cfg.predictor_memory, cfg.seed
    )
    result = run_collaborative_denoising(
        coarse, cameras, predictor, _denoising_config(cfg), policy=cfg.fusion,
        schedule=schedule, frags=frags,
        scores=[compute_scores(coarse, cam, frag, cfg.z_far) for cam, frag in zip(cameras, frags)],
    )
    return result


def _run_pixel_stage(cfg: RunConfig, scene, result):
    if cfg.channels < 3:
        raise ConfigError("the pixel stage needs at least 3 latent channels to decode RGB")
    fine = scene["fine"]
    cams = _pixel_cameras(cfg)
    frags = [rasterize(fine, cam) for cam in cams]
    scores = [compute_scores(fine, cam, frag, cfg.z_far) for cam, frag in zip(cams, frags)]
    images = []
    for idx, frag in zip(_pixel_view_indices(cfg), frags):
        rgb = decode_to_rgb(result.latents[idx].data, cfg.image_size)
        images.append(FeatureImage(rgb, frag.foreground))
    repo, texture = pixel_aggregate(
        images, frags, scores, fine, cfg.tau_f, cfg.tau_b, cfg.tau_d
    )
    variances = vertex_variance(repo)
    mask = build_conflict_mask(variances, cfg.conflict_lambda)
    view_masks = [
        render_mask_dilated(mask, fine, cam, cfg.dilate_kernel, frag=frag)
        for cam, frag in zip(cams, frags)
    ]
    return {
        "cams": cams,
        "frags": frags,
        "scores": scores,
        "images": images,
        "repo": repo,
        "texture": texture,
        "variances": variances,
        "mask": mask,
        "view_masks": view_masks,
    }


def _cmd_texture(cfg: RunConfig, scene, out: Path) -> None:
    t0 = time.perf_counter()
    result = _run_latent_stage(cfg, scene)
    t1 = time.perf_counter()
    pixel = _run_pixel_stage(cfg, scene, result)
    t2 = time.perf_counter()
    refined = inpaint_refine(
        scene["fine"],
        pixel["texture"],
        pixel["mask"],
        pixel["view_masks"],
        pixel["frags"],
        pixel["scores"],
        HarmonicInpainter(),
        z_far=cfg.z_far,
        tau_b=cfg.tau_b,
        tau_d=cfg.tau_d,
    )
    t3 = time.perf_counter()

    save_ply(out / "texture.ply", scene["fine"], refined.texture)
    result.trajectory.write_csv(out / "trajectory.csv")
    if result.variance_rows:
        write_variance_csv(out / "variance_stats.csv", result.variance_rows)
    for n, (cam, frag) in enumerate(zip(pixel["cams"], pixel["frags"])):
        plane = render_attributes(scene["fine"], frag, refined.texture)
        _save_png(out / f"render_{n:02d}.png", plane.data)
        _save_png(out / f"mask_{n:02d}.png", pixel["view_masks"][n].astype(np.float64))
    summary = {
        "policy": result.policy,
        "flagged_vertices": pixel["mask"].count,
        "residual_flags": int(refined.residual.sum()),
        "fallback_vertices": int(pixel["repo"].fallback.sum()),
        "fine_vertices": scene["fine"].vertex_count,
        "coarse_vertices": scene["coarse"].vertex_count,
        "runtimes": {
            "denoise_s": round(t1 - t0, 3),
            "aggregate_s": round(t2 - t1, 3),
            "refine_s": round(t3 - t2, 3),
            "total_s": round(t3 - t0, 3),
        },
    }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_detect_conflicts(cfg: RunConfig, scene, out: Path) -> None:
    result = _run_latent_stage(cfg, scene)
    pixel = _run_pixel_stage(cfg, scene, result)
    save_ply(out / "initial_texture.ply", scene["fine"], pixel["texture"])
    for n, vm in enumerate(pixel["view_masks"]):
        _save_png(out / f"mask_{n:02d}.png", vm.astype(np.float64))
    report = {
        "flagged_vertices": pixel["mask"].count,
        "total_vertices": scene["fine"].vertex_count,
        "threshold": cfg.conflict_lambda,
        "max_variance": float(pixel["variances"].max()),
    }
    with open(out / "conflict_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_analyze_variance(cfg: RunConfig, scene, out: Path) -> None:
    coarse = scene["coarse"]
    cameras = _ring(cfg, cfg.latent_size)
    frags = [rasterize(coarse, cam) for cam in cameras]
    field = value_field(cfg.target, cfg.channels, cfg.seed)
    schedule = build_schedule(cfg.steps, cfg.schedule_kind)
    predictor = ToyPredictor(
        render_targets(coarse, frags, field),
        schedule,
        cfg.perturbation,
        cfg.predictor_memory,
        cfg.seed,
    )
    results = run_policy_comparison(coarse, cameras, predictor, _denoising_config(cfg))
    write_comparison_csv(out / "analyze_variance.csv", results)
    _plot_trajectories(results, out / "analyze_variance.png")


def _plot_trajectories(results, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    styles = {"baseline": "tab:blue", "mvar": "tab:green", "mvar_va": "tab:red"}
    for policy, result in results.items():
        steps = [r.step for r in result.trajectory.records]
        ax.plot(steps, result.trajectory.column("std_post_va"), color=styles[policy], label=policy)
    ax.set_xlabel("denoising step")
    ax.set_ylabel("foreground std")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


if __name__ == "__main__":
    sys.exit(main())
