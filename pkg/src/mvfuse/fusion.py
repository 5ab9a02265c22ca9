"""Cross-view aggregation, re-rasterization, and variance alignment.

Per-view vertex banks are fused into a single per-vertex feature set by
weighted power means, re-rasterized onto each view, and the re-rendered
planes are corrected for the variance shrinkage that convex barycentric
mixing introduces (a Jensen's-inequality effect).
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, StatisticsError
from .mesh import Mesh
from .projection import FeatureImage, VertexProjection, power_weight, render_attributes
from .raster import FragmentBuffer

log = logging.getLogger(__name__)


@dataclass
class VertexBank:
    """Per-view, per-vertex features and aggregation weights.

    per_view_features: (N, J, C); per_view_weights: (N, J) >= 0 with
    exactly 0 on invisible entries; visibility: (N, J) bool.
    """

    per_view_features: np.ndarray
    per_view_weights: np.ndarray
    visibility: np.ndarray

    def __post_init__(self):
        self.per_view_features = np.asarray(self.per_view_features, dtype=np.float64)
        self.per_view_weights = np.asarray(self.per_view_weights, dtype=np.float64)
        self.visibility = np.asarray(self.visibility, dtype=bool)

    @classmethod
    def from_views(cls, views: Sequence[VertexProjection]) -> "VertexBank":
        if not views:
            raise InvalidInputError("need at least one view")
        return cls(
            np.stack([v.features for v in views]),
            np.stack([v.weights for v in views]),
            np.stack([v.visible for v in views]),
        )

    @property
    def n_views(self) -> int:
        return self.per_view_features.shape[0]


@dataclass
class AggregatedMesh:
    """Fused per-vertex features.

    coverage counts contributing views; vertices with zero total weight
    carry fallback=True and hold the caller-supplied fallback values so
    no entry is ever NaN.
    """

    features: np.ndarray  # (J, C)
    coverage: np.ndarray  # (J,) int
    fallback: np.ndarray  # (J,) bool


@dataclass
class VarianceStats:
    """Per-channel foreground statistics of a re-rasterized plane.

    mean_2d/std_2d describe the observed plane; mean_3d is the mean of
    the aggregated features over the vertices the plane references;
    std_3d is the analytic target derived from the barycentric
    recombination moments (see estimate_variance_stats).
    """

    mean_2d: np.ndarray
    std_2d: np.ndarray
    mean_3d: np.ndarray
    std_3d: np.ndarray


def aggregate_views(
    bank: VertexBank, tau_w: float = 3.0, fallback: np.ndarray | None = None
) -> AggregatedMesh:
    """Fuse per-view vertex features across views.

    Per vertex: features = sum_n feat[n] * w[n]^tau_w / omega with
    omega = sum_n w[n]^tau_w. Vertices with omega == 0 take the fallback
    values (zeros when none are supplied) and are flagged.
    """
    n, j, c = bank.per_view_features.shape
    if bank.per_view_weights.shape != (n, j) or bank.visibility.shape != (n, j):
        raise InvalidInputError("bank arrays have inconsistent shapes")
    w = power_weight(bank.per_view_weights, tau_w)
    w = np.where(bank.visibility, w, 0.0)
    omega = w.sum(axis=0)
    covered = omega > 0.0
    features = np.zeros((j, c), dtype=np.float64)
    features[covered] = (
        np.einsum("nj,njc->jc", w, bank.per_view_features)[covered]
        / omega[covered, None]
    )
    if fallback is not None:
        fallback = np.asarray(fallback, dtype=np.float64)
        if fallback.shape != (j, c):
            raise InvalidInputError("fallback must be (J, C)")
        features[~covered] = fallback[~covered]
    coverage = bank.visibility.sum(axis=0).astype(np.int64)
    return AggregatedMesh(features, coverage, ~covered)


def rasterize_back(
    agg: AggregatedMesh,
    mesh: Mesh,
    frags: Sequence[FragmentBuffer],
    originals: Sequence[FeatureImage],
) -> list[FeatureImage]:
    """Render the fused vertex features onto each view.

    Foreground pixels are the barycentric interpolation of the aggregated
    features; background pixels are copied from the original planes.
    """
    if len(frags) != len(originals):
        raise InvalidInputError("frags and originals must align per view")
    out = []
    for frag, orig in zip(frags, originals):
        plane = render_attributes(mesh, frag, agg.features)
        data = np.where(frag.foreground[:, :, None], plane.data, orig.data)
        out.append(FeatureImage(data, frag.foreground))
    return out


def estimate_variance_stats(
    agg: AggregatedMesh, frag: FragmentBuffer, rasterized: FeatureImage, mesh: Mesh
) -> VarianceStats:
    """Foreground statistics plus the analytic recombination variance.

    Every foreground pixel mixes its face's three vertex features with
    barycentric coefficients. The recombination variance decomposes into
    the three squared-coefficient variance terms plus the doubled
    pairwise covariance terms of the weighted contributions
    c_u = B_u * feat_u; those moments are taken over the foreground
    pixel population.
    """
    fg = frag.foreground
    n_px = int(fg.sum())
    if n_px < 2:
        raise StatisticsError("need at least 2 foreground pixels for statistics")
    vals = rasterized.data[fg]
    mean_2d = vals.mean(axis=0)
    std_2d = vals.std(axis=0)

    tri = mesh.faces[frag.face_index[fg]]        # (P, 3)
    bary = frag.barycentric[fg]                  # (P, 3)
    referenced = np.unique(tri)
    mean_3d = agg.features[referenced].mean(axis=0)

    # pre-centering by mean_3d is exact (coefficients sum to 1) and keeps
    # the constant-feature case at zero instead of float cancellation noise
    contrib = bary[:, :, None] * (agg.features[tri] - mean_3d)  # (P, 3, C)
    dev = contrib - contrib.mean(axis=0)
    var_terms = (dev**2).mean(axis=0)                     # (3, C) B_u^2-weighted variances
    cov_terms = (
        (dev[:, 0] * dev[:, 1]).mean(axis=0)
        + (dev[:, 0] * dev[:, 2]).mean(axis=0)
        + (dev[:, 1] * dev[:, 2]).mean(axis=0)
    )
    var_3d = var_terms.sum(axis=0) + 2.0 * cov_terms
    std_3d = np.sqrt(np.maximum(var_3d, 0.0))
    return VarianceStats(mean_2d, std_2d, mean_3d, std_3d)


def estimate_variance_stats_pooled(
    agg: AggregatedMesh,
    frags: Sequence[FragmentBuffer],
    rasterized: Sequence[FeatureImage],
    mesh: Mesh,
) -> VarianceStats:
    """Same as estimate_variance_stats but pooled over all views."""
    vals, tris, barys = [], [], []
    for frag, plane in zip(frags, rasterized):
        fg = frag.foreground
        if fg.any():
            vals.append(plane.data[fg])
            tris.append(mesh.faces[frag.face_index[fg]])
            barys.append(frag.barycentric[fg])
    if not vals or sum(len(v) for v in vals) < 2:
        raise StatisticsError("need at least 2 foreground pixels for statistics")
    vals_all = np.concatenate(vals)
    tri = np.concatenate(tris)
    bary = np.concatenate(barys)
    mean_2d = vals_all.mean(axis=0)
    std_2d = vals_all.std(axis=0)
    mean_3d = agg.features[np.unique(tri)].mean(axis=0)
    contrib = bary[:, :, None] * (agg.features[tri] - mean_3d)
    dev = contrib - contrib.mean(axis=0)
    var_terms = (dev**2).mean(axis=0)
    cov_terms = (
        (dev[:, 0] * dev[:, 1]).mean(axis=0)
        + (dev[:, 0] * dev[:, 2]).mean(axis=0)
        + (dev[:, 1] * dev[:, 2]).mean(axis=0)
    )
    var_3d = var_terms.sum(axis=0) + 2.0 * cov_terms
    return VarianceStats(mean_2d, std_2d, mean_3d, np.sqrt(np.maximum(var_3d, 0.0)))


def variance_align(rasterized: FeatureImage, stats: VarianceStats) -> FeatureImage:
    """Affine per-channel correction of the foreground statistics.

    Foreground values are remapped so the plane's per-channel foreground
    std equals std_3d and its mean equals mean_3d:

        x' = (x - mean_2d) / std_2d * std_3d + mean_3d

    Channels with std_2d == 0 cannot be rescaled and pass through with a
    warning when a nonzero target exists. Background is untouched.
    """
    data = rasterized.data.copy()
    fg = rasterized.foreground
    for ch in range(rasterized.channels):
        s2 = stats.std_2d[ch]
        if s2 <= 0.0:
            if stats.std_3d[ch] > 0.0:
                log.warning(
                    "channel %d: constant plane cannot be rescaled to std %.3g",
                    ch,
                    stats.std_3d[ch],
                )
            continue
        data[fg, ch] = (
            (data[fg, ch] - stats.mean_2d[ch]) / s2 * stats.std_3d[ch]
            + stats.mean_3d[ch]
        )
    return FeatureImage(data, fg)


def check_convex_variance_inequality(
    weights: np.ndarray, samples: np.ndarray, tol: float = 1e-9
) -> tuple[bool, float]:
    """Verify Var(sum_i w_i x_i) <= sum_i w_i Var(x_i) + tol.

    `weights` is (K,) non-negative summing to 1; `samples` is (K, M), one
    series per weight. Returns (holds, slack) with slack = bound - Var of
    the combination. Sample variances use the (M - 1) divisor.
    """
    weights = np.asarray(weights, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.float64)
    if weights.ndim != 1 or samples.ndim != 2 or samples.shape[0] != weights.shape[0]:
        raise InvalidInputError("weights (K,) must pair with samples (K, M)")
    if np.any(weights < 0.0):
        raise InvalidInputError("weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidInputError("weights must sum to 1 within 1e-9")
    if samples.shape[1] < 2:
        raise StatisticsError("need at least 2 samples per series")
    combined = weights @ samples
    var_combined = combined.var(ddof=1)
    bound = float(weights @ samples.var(axis=1, ddof=1))
    slack = bound - var_combined
    return bool(var_combined <= bound + tol), float(slack)


def rasterization_variance_bound(
    agg: AggregatedMesh, frag: FragmentBuffer, mesh: Mesh
) -> np.ndarray:
    """Per-channel convex upper bound for the re-rasterized variance.

    bound_c = sum_u mean_pixels(B_u) * Var_pixels(feat_u,c), the convex
    combination of the per-slot feature variances with the averaged
    barycentric coefficients as weights.
    """
    fg = frag.foreground
    if int(fg.sum()) < 2:
        raise StatisticsError("need at least 2 foreground pixels")
    tri = mesh.faces[frag.face_index[fg]]
    bary = frag.barycentric[fg]
    slot_feats = agg.features[tri]                 # (P, 3, C)
    slot_var = slot_feats.var(axis=0)              # (3, C)
    mean_b = bary.mean(axis=0)                     # (3,)
    return np.einsum("u,uc->c", mean_b, slot_var)


def write_variance_csv(path: str | os.PathLike, rows: Sequence[dict]) -> None:
    """Append per-step variance diagnostics to a CSV file.

    Each row carries: step, view, channel, std_2d, std_3d, mean_2d,
    mean_3d. The header is written when the file does not exist yet.
    """
    fields = ["step", "view", "channel", "std_2d", "std_3d", "mean_2d", "mean_3d"]
    fresh = not os.path.exists(path)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        if fresh:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fields})
