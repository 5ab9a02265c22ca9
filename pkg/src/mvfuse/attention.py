"""Self-attention over 2D planes and volumetric 3D grid groups.

The 3D branch lifts foreground features to their surface points,
partitions space into cubic cells, and runs softmax attention within
each cell so tokens from different views interact. The 2D branch runs
full-plane attention per view. Both branches use identity query, key,
and value projections (an optional seeded orthonormal projection is
available for experimentation) and are averaged on the foreground.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .mesh import Mesh
from .projection import FeatureImage
from .raster import FragmentBuffer


@dataclass
class LiftedFeatureSet:
    """Foreground features with their 3D surface positions.

    points: (P, 3) in normalized scene units; features: (P, C);
    origins: (P, 2) int rows (view index, flat pixel index).
    """

    points: np.ndarray
    features: np.ndarray
    origins: np.ndarray


@dataclass
class GridPartition:
    grid_size: float
    assignment: np.ndarray  # (P, 3) integer cell ids per axis


def lift_foreground(
    features: Sequence[FeatureImage],
    frags: Sequence[FragmentBuffer],
    mesh: Mesh,
) -> LiftedFeatureSet:
    """One 3D point per foreground pixel across all views.

    The point is the linear barycentric interpolation of the pixel's face
    vertices; it carries the pixel's feature row and (view, pixel) origin.
    """
    if len(features) != len(frags):
        raise InvalidInputError("features and frags must align per view")
    pts, rows, origins = [], [], []
    for n, (plane, frag) in enumerate(zip(features, frags)):
        fg = frag.foreground
        if not fg.any():
            continue
        rr, cc = np.nonzero(fg)
        tri = mesh.faces[frag.face_index[fg]]
        bary = frag.barycentric[fg]
        pts.append(np.einsum("pu,puv->pv", bary, mesh.vertices[tri]))
        rows.append(plane.data[fg])
        width = fg.shape[1]
        origins.append(np.stack([np.full_like(rr, n), rr * width + cc], axis=1))
    if not pts:
        c = features[0].channels if features else 0
        return LiftedFeatureSet(
            np.zeros((0, 3)), np.zeros((0, c)), np.zeros((0, 2), dtype=np.int64)
        )
    return LiftedFeatureSet(
        np.concatenate(pts), np.concatenate(rows), np.concatenate(origins)
    )


def partition_grid(points, grid_size: float) -> GridPartition:
    """Assign each point to a cubic cell: floor((coord + 1) / grid_size)."""
    if grid_size <= 0:
        raise InvalidInputError("grid size must be positive")
    if isinstance(points, LiftedFeatureSet):
        points = points.points
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cells = np.floor((points + 1.0) / grid_size).astype(np.int64)
    return GridPartition(float(grid_size), cells)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def group_attention(
    rows: np.ndarray,
    temperature: float | None = None,
    projection: np.ndarray | None = None,
    return_weights: bool = False,
):
    """Softmax self-attention over one group of feature rows.

    out_i = sum_k softmax_k(<q_i, q_k> * temperature) * rows_k with
    identity projections by default (q = rows) and temperature
    1/sqrt(C). `projection` replaces the query/key projection.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise InvalidInputError("group must be a non-empty (n, C) array")
    c = rows.shape[1]
    if temperature is None:
        temperature = 1.0 / np.sqrt(c)
    q = rows @ projection if projection is not None else rows
    weights = softmax_rows((q @ q.T) * temperature)
    out = weights @ rows
    return (out, weights) if return_weights else out


def random_orthonormal_projection(channels: int, seed: int) -> np.ndarray:
    """Seeded random orthonormal matrix for the experimentation hook."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((channels, channels)))
    return q * np.sign(np.diag(r))


def attend_within_cells(
    lifted: LiftedFeatureSet,
    partition: GridPartition,
    temperature: float | None = None,
    projection: np.ndarray | None = None,
) -> np.ndarray:
    """Run group attention in every occupied grid cell; returns (P, C)."""
    out = np.empty_like(lifted.features)
    if len(lifted.features) == 0:
        return out
    _, inverse = np.unique(partition.assignment, axis=0, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(inverse.max() + 2))
    for g in range(len(bounds) - 1):
        idx = order[bounds[g] : bounds[g + 1]]
        if len(idx):
            out[idx] = group_attention(lifted.features[idx], temperature, projection)
    return out


def plane_attention(
    plane: FeatureImage,
    temperature: float | None = None,
    projection: np.ndarray | None = None,
) -> FeatureImage:
    """Full-token self-attention over one H x W plane."""
    h, w, c = plane.data.shape
    tokens = plane.data.reshape(-1, c)
    out = group_attention(tokens, temperature, projection)
    return FeatureImage(out.reshape(h, w, c), plane.foreground)


def jnp_mix(
    features_2d_branch: Sequence[FeatureImage],
    features_3d_branch: Sequence[FeatureImage],
) -> list[FeatureImage]:
    """Element-wise mean of the branches on foreground, 2D elsewhere."""
    if len(features_2d_branch) != len(features_3d_branch):
        raise InvalidInputError("branch view counts differ")
    out = []
    for a, b in zip(features_2d_branch, features_3d_branch):
        if a.data.shape != b.data.shape:
            raise InvalidInputError("branch shapes differ")
        mixed = a.data.copy()
        fg = a.foreground
        mixed[fg] = (a.data[fg] + b.data[fg]) / 2.0
        out.append(FeatureImage(mixed, fg))
    return out


def joint_noise_prediction(
    planes: Sequence[FeatureImage],
    frags: Sequence[FragmentBuffer],
    mesh: Mesh,
    grid_size: float,
    temperature: float | None = None,
    projection: np.ndarray | None = None,
) -> list[FeatureImage]:
    """2D per-view attention and 3D grid attention, averaged on foreground."""
    branch_2d = [plane_attention(p, temperature, projection) for p in planes]
    lifted = lift_foreground(planes, frags, mesh)
    attended = attend_within_cells(
        lifted, partition_grid(lifted, grid_size), temperature, projection
    )
    branch_3d = [FeatureImage(p.data.copy(), p.foreground) for p in branch_2d]
    for n, plane in enumerate(branch_3d):
        sel = lifted.origins[:, 0] == n
        if sel.any():
            c = plane.data.shape[2]
            plane.data.reshape(-1, c)[lifted.origins[sel, 1]] = attended[sel]
    return jnp_mix(branch_2d, branch_3d)


def grid_size_for_step(step_index: int, sizes: tuple[float, float] = (0.34, 0.25)) -> float:
    """Alternating receptive-field size: sizes[0] on even steps, sizes[1] on odd."""
    return sizes[step_index % 2]
