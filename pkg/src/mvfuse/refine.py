"""Pixel-domain texture aggregation and conflict-driven inpainting.

Per-view RGB images are aggregated onto a fine mesh; vertices whose
colors disagree across views beyond a variance threshold are flagged,
rendered into per-view masks, dilated, filled by a pluggable inpainter,
and re-projected back onto the flagged vertices, view by view.
"""

from __future__ import annotations

import logging
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import InvalidInputError
from .fusion import VertexBank, aggregate_views
from .mesh import Mesh
from .projection import FeatureImage, ScoreMaps, back_project, render_attributes
from .raster import FragmentBuffer, rasterize

log = logging.getLogger(__name__)

# inpainter signature: (image (H,W,3), mask (H,W) bool, depth (H,W) or None) -> (H,W,3)
Inpainter = Callable[[np.ndarray, np.ndarray, np.ndarray | None], np.ndarray]


@dataclass
class ColorRepository:
    """Per-view vertex colors on the fine mesh.

    per_view_colors: (N, J, 3) in [0, 1]; visibility: (N, J) bool.
    fallback marks vertices invisible in every view whose texture color
    was borrowed from the nearest visible neighbor.
    """

    per_view_colors: np.ndarray
    visibility: np.ndarray
    fallback: np.ndarray


@dataclass
class ConflictMask:
    """Per-vertex conflict indicator: flags[j] == True iff Var_j > threshold."""

    flags: np.ndarray
    threshold: float

    @property
    def count(self) -> int:
        return int(self.flags.sum())


@dataclass
class RefinementResult:
    texture: np.ndarray          # (J, 3) refined vertex colors
    residual: np.ndarray         # (J,) flags that no view could clear
    refined_views: list[np.ndarray]  # per-view planes after filling


def pixel_aggregate(
    images: Sequence[FeatureImage],
    frags: Sequence[FragmentBuffer],
    scores: Sequence[ScoreMaps],
    fine_mesh: Mesh,
    tau_f: float = 6.0,
    tau_b: float = 2.0,
    tau_d: float = 2.0,
) -> tuple[ColorRepository, np.ndarray]:
    """Aggregate per-view images into an initial vertex-color texture.

    Back-projection uses the usual barycentric/score weighting; the
    cross-view mix uses the pixel-domain exponent tau_f. Vertices visible
    in no view borrow the nearest visible vertex's color and are flagged.
    """
    views = [
        back_project(img, frag, sc, fine_mesh, tau_b, tau_d)
        for img, frag, sc in zip(images, frags, scores)
    ]
    bank = VertexBank.from_views(views)
    agg = aggregate_views(bank, tau_w=tau_f)
    texture = agg.features.copy()
    orphan = agg.fallback
    if orphan.any():
        seen = ~orphan
        if not seen.any():
            raise InvalidInputError("no vertex is visible in any view")
        tree = cKDTree(fine_mesh.vertices[seen])
        _, nearest = tree.query(fine_mesh.vertices[orphan])
        texture[orphan] = texture[seen][nearest]
        log.warning("%d vertices invisible in all views; borrowed neighbor colors", int(orphan.sum()))
    texture = np.clip(texture, 0.0, 1.0)
    return ColorRepository(bank.per_view_features, bank.visibility, orphan), texture


def vertex_variance(repo: ColorRepository) -> np.ndarray:
    """Cross-view color variance per vertex, summed over RGB channels.

    Var_j = sum_n ||color_{n,j} - mean_j||^2 / (count_j - 1) over the
    views where the vertex is visible; vertices seen by fewer than two
    views get 0.
    """
    colors = repo.per_view_colors
    vis = repo.visibility.astype(np.float64)
    count = vis.sum(axis=0)
    ok = count >= 2
    var = np.zeros(colors.shape[1], dtype=np.float64)
    if ok.any():
        w = vis[:, :, None]
        mean = (colors * w).sum(axis=0) / np.maximum(count, 1.0)[:, None]
        dev = (colors - mean) * w
        ss = (dev**2).sum(axis=(0, 2))
        var[ok] = ss[ok] / (count[ok] - 1.0)
    return var


def build_conflict_mask(variances: np.ndarray, threshold: float = 0.005) -> ConflictMask:
    """Flag vertices with variance strictly above the threshold."""
    if threshold < 0:
        raise InvalidInputError("threshold must be >= 0")
    return ConflictMask(np.asarray(variances) > threshold, float(threshold))


def render_mask_dilated(
    mask: ConflictMask,
    fine_mesh: Mesh,
    camera,
    kernel: int = 8,
    frag: FragmentBuffer | None = None,
) -> np.ndarray:
    """Render the vertex mask to a view and dilate it with a square kernel."""
    if kernel < 1:
        raise InvalidInputError("kernel must be >= 1")
    if frag is None:
        frag = rasterize(fine_mesh, camera)
    plane = render_attributes(fine_mesh, frag, mask.flags.astype(np.float64))
    binary = plane.data[:, :, 0] >= 0.5
    if not binary.any():
        return binary
    return ndimage.binary_dilation(binary, structure=np.ones((kernel, kernel), dtype=bool))


class HarmonicInpainter:
    """Masked harmonic fill by iterative neighbor averaging.

    Masked pixels start at the mean of the unmasked foreground boundary
    and are relaxed toward the average of their known neighbors until the
    largest update drops below `tol`. Unmasked pixels never change;
    background pixels outside the mask are excluded from the averaging so
    they cannot bleed into the fill.
    """

    def __init__(self, tol: float = 1e-4, max_iters: int = 20000):
        self.tol = tol
        self.max_iters = max_iters

    def __call__(
        self, image: np.ndarray, mask: np.ndarray, depth: np.ndarray | None = None
    ) -> np.ndarray:
        mask = np.asarray(mask, dtype=bool)
        out = np.asarray(image, dtype=np.float64).copy()
        if not mask.any():
            return out
        known = ~mask
        boundary = known & _has_content(image)
        fill_value = out[boundary].mean(axis=0) if boundary.any() else out[known].mean(axis=0)
        out[mask] = fill_value

        valid = mask | boundary  # pixels allowed to feed the averaging
        for _ in range(self.max_iters):
            acc = np.zeros_like(out)
            cnt = np.zeros(mask.shape, dtype=np.float64)
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                shifted = np.roll(out, (dr, dc), axis=(0, 1))
                ok = np.roll(valid, (dr, dc), axis=(0, 1))
                # roll wraps; kill wrapped rows/cols
                if dr == 1:
                    ok[0, :] = False
                elif dr == -1:
                    ok[-1, :] = False
                if dc == 1:
                    ok[:, 0] = False
                elif dc == -1:
                    ok[:, -1] = False
                acc += np.where(ok[:, :, None], shifted, 0.0)
                cnt += ok
            upd = mask & (cnt > 0)
            new_vals = acc[upd] / cnt[upd][:, None]
            delta = np.abs(new_vals - out[upd]).max() if upd.any() else 0.0
            out[upd] = new_vals
            if delta < self.tol:
                break
        return out


def _has_content(image: np.ndarray) -> np.ndarray:
    """Heuristic foreground for the fill boundary: any nonzero channel."""
    return np.abs(image).sum(axis=2) > 0


class SubprocessInpainter:
    """External inpainter behind a PNG file contract.

    The command is invoked with four appended paths: the 8-bit RGB image,
    the 8-bit grayscale mask (255 = fill), the 8-bit grayscale depth, and
    the output path the process must write as an 8-bit RGB PNG.
    """

    def __init__(self, command: Sequence[str]):
        if not command:
            raise InvalidInputError("command must be non-empty")
        self.command = list(command)

    def __call__(
        self, image: np.ndarray, mask: np.ndarray, depth: np.ndarray | None = None
    ) -> np.ndarray:
        from PIL import Image

        with tempfile.TemporaryDirectory(prefix="mvfuse-inpaint-") as tmp:
            tmp = Path(tmp)
            img_path, mask_path = tmp / "image.png", tmp / "mask.png"
            depth_path, out_path = tmp / "depth.png", tmp / "out.png"
            Image.fromarray(_to_u8(image)).save(img_path)
            Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(mask_path)
            d = depth if depth is not None else np.zeros(mask.shape)
            Image.fromarray(_to_u8(d)).save(depth_path)
            subprocess.run(
                self.command + [str(img_path), str(mask_path), str(depth_path), str(out_path)],
                check=True,
            )
            filled = np.asarray(Image.open(out_path).convert("RGB"), dtype=np.float64) / 255.0
        if filled.shape[:2] != mask.shape:
            raise InvalidInputError("inpainter returned a wrong-sized image")
        out = np.asarray(image, dtype=np.float64).copy()
        out[mask] = filled[mask]
        return out


def _to_u8(arr: np.ndarray) -> np.ndarray:
    arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    return np.rint(arr * 255.0).astype(np.uint8)


def inpaint_refine(
    fine_mesh: Mesh,
    texture: np.ndarray,
    mask: ConflictMask,
    view_masks: Sequence[np.ndarray],
    frags: Sequence[FragmentBuffer],
    scores: Sequence[ScoreMaps],
    inpainter: Inpainter | None = None,
    z_far: float = 5.0,
    tau_b: float = 2.0,
    tau_d: float = 2.0,
) -> RefinementResult:
    """Sequential per-view inpainting of the flagged texture regions.

    For each view in order: render the current texture, fill the masked
    pixels, re-project the filled pixels onto the still-flagged vertices
    visible there, update those vertices, and clear their flags. Flags no
    view can reach remain in the residual report. A failing inpainter
    skips its view with a warning. Unflagged vertices are never modified.
    """
    if inpainter is None:
        inpainter = HarmonicInpainter()
    texture = np.asarray(texture, dtype=np.float64).copy()
    remaining = mask.flags.copy()
    refined_views: list[np.ndarray] = []
    for n, (vm, frag, sc) in enumerate(zip(view_masks, frags, scores)):
        plane = render_attributes(fine_mesh, frag, texture)
        depth = np.clip(
            1.0 - np.where(frag.foreground, frag.depth, z_far) / z_far, 0.0, 1.0
        )
        try:
            filled = inpainter(plane.data, np.asarray(vm, dtype=bool), depth)
        except Exception:  # noqa: BLE001 - a broken view must not kill the loop
            log.warning("inpainter failed on view %d; skipping", n, exc_info=True)
            refined_views.append(plane.data)
            continue
        refined_views.append(filled)
        if not remaining.any():
            continue
        proj = back_project(
            FeatureImage(filled, frag.foreground),
            frag,
            sc,
            fine_mesh,
            tau_b,
            tau_d,
            pixel_mask=np.asarray(vm, dtype=bool),
        )
        update = remaining & proj.visible
        if update.any():
            texture[update] = np.clip(proj.features[update], 0.0, 1.0)
            remaining[update] = False
    if remaining.any():
        log.warning("%d flagged vertices not visible in any inpainted view", int(remaining.sum()))
    return RefinementResult(texture, remaining, refined_views)
