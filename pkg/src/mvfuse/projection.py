"""Mapping between mesh vertices and 2D feature planes.

Forward direction: barycentric attribute rendering onto a fragment
buffer. Inverse direction: back-projection of a feature plane onto the
vertices of the rasterized mesh, weighted by each pixel's barycentric
share of the vertex plus view/distance scores.

All functions are pure and safe to call concurrently across views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .errors import ConfigError, InvalidInputError
from .mesh import Mesh
from .raster import FragmentBuffer


@dataclass
class FeatureImage:
    """H x W x C feature plane with a per-pixel foreground flag."""

    data: np.ndarray
    foreground: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            self.data = self.data[:, :, None]
        self.foreground = np.asarray(self.foreground, dtype=bool)
        if self.foreground.shape != self.data.shape[:2]:
            raise InvalidInputError("foreground mask must match plane resolution")

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class ScoreMaps:
    """Per-pixel aggregation scores.

    view_score: cosine between the interpolated surface normal and the
    direction toward the camera, in [-1, 1]; 0 on background.
    distance_score: 1 - depth/z_far clamped to [0, 1]; 0 on background.
    """

    view_score: np.ndarray
    distance_score: np.ndarray


@dataclass
class VertexProjection:
    """One view's back-projected vertex features.

    features: (J, C) accumulated pixel features per vertex
    weights: (J,) aggregation weights in [0, 1]
    visible: (J,) True where at least one pixel contributed
    """

    features: np.ndarray
    weights: np.ndarray
    visible: np.ndarray


def power_weight(x: np.ndarray, exponent: float) -> np.ndarray:
    """Sharpening weight x**exponent with negative inputs clamped to 0."""
    return np.power(np.maximum(x, 0.0), exponent)


def render_attributes(
    mesh: Mesh, frag: FragmentBuffer, values: np.ndarray | None = None
) -> FeatureImage:
    """Linear barycentric interpolation of per-vertex values onto pixels.

    Background pixels are zero. `values` defaults to mesh.attributes.
    """
    if values is None:
        values = mesh.attributes
    if values is None:
        raise InvalidInputError("mesh has no attributes and no values were given")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    fg = frag.foreground
    h, w = fg.shape
    out = np.zeros((h, w, values.shape[1]), dtype=np.float64)
    if fg.any():
        tri = mesh.faces[frag.face_index[fg]]          # (P, 3)
        bary = frag.barycentric[fg]                    # (P, 3)
        out[fg] = np.einsum("pu,puc->pc", bary, values[tri])
    return FeatureImage(out, fg)


def surface_points(mesh: Mesh, frag: FragmentBuffer) -> np.ndarray:
    """World-space surface point for each foreground pixel, (P, 3)."""
    fg = frag.foreground
    tri = mesh.faces[frag.face_index[fg]]
    bary = frag.barycentric[fg]
    return np.einsum("pu,puv->pv", bary, mesh.vertices[tri])


def compute_scores(
    mesh: Mesh, camera: Camera, frag: FragmentBuffer, z_far: float = 5.0
) -> ScoreMaps:
    """View and distance score maps for one rasterized view."""
    if z_far <= 0:
        raise ConfigError("z_far must be positive")
    if mesh.normals is None:
        raise InvalidInputError("mesh needs vertex normals; run compute_vertex_normals")
    fg = frag.foreground
    view = np.zeros(fg.shape, dtype=np.float64)
    dist = np.zeros(fg.shape, dtype=np.float64)
    if fg.any():
        tri = mesh.faces[frag.face_index[fg]]
        bary = frag.barycentric[fg]
        normal = np.einsum("pu,puv->pv", bary, mesh.normals[tri])
        nlen = np.linalg.norm(normal, axis=1)
        nlen[nlen < 1e-12] = 1.0
        normal /= nlen[:, None]
        to_cam = camera.eye - surface_points(mesh, frag)
        to_cam /= np.linalg.norm(to_cam, axis=1, keepdims=True)
        view[fg] = np.einsum("pv,pv->p", normal, to_cam)
        dist[fg] = np.clip(1.0 - frag.depth[fg] / z_far, 0.0, 1.0)
    return ScoreMaps(view, dist)


def back_project(
    feature: FeatureImage,
    frag: FragmentBuffer,
    scores: ScoreMaps,
    mesh: Mesh,
    tau_b: float = 2.0,
    tau_d: float = 2.0,
    pixel_mask: np.ndarray | None = None,
) -> VertexProjection:
    """Project a feature plane back onto mesh vertices.

    Every foreground pixel contributes to the three vertices of its face,
    weighted by that vertex's barycentric share raised to tau_b. Per
    vertex j:

        features[j] = sum_i X_i * b_i^tau_b / eta
        weights[j]  = sum_i S_i * D_i^tau_d * b_i^tau_b / eta

    with eta the sum of the barycentric weights, b_i the pixel's share of
    vertex j, and negative view scores clamped to zero. Vertices with no
    contributing pixel get weight 0 and visible=False.

    `pixel_mask` restricts the contributing pixels (used when re-projecting
    inpainted regions).
    """
    if feature.data.shape[:2] != frag.face_index.shape:
        raise InvalidInputError("feature plane and fragment buffer resolutions differ")
    fg = frag.foreground
    if pixel_mask is not None:
        fg = fg & pixel_mask
    j, c = mesh.vertex_count, feature.channels
    feat_num = np.zeros((j, c), dtype=np.float64)
    weight_num = np.zeros(j, dtype=np.float64)
    eta = np.zeros(j, dtype=np.float64)
    if fg.any():
        tri = mesh.faces[frag.face_index[fg]]              # (P, 3)
        bw = power_weight(frag.barycentric[fg], tau_b)     # (P, 3)
        vals = feature.data[fg]                            # (P, C)
        s = np.maximum(scores.view_score[fg], 0.0)
        d = power_weight(scores.distance_score[fg], tau_d)
        sd = s * d
        for u in range(3):
            np.add.at(eta, tri[:, u], bw[:, u])
            np.add.at(feat_num, tri[:, u], bw[:, u, None] * vals)
            np.add.at(weight_num, tri[:, u], bw[:, u] * sd)
    visible = eta > 0.0
    features = np.zeros((j, c), dtype=np.float64)
    weights = np.zeros(j, dtype=np.float64)
    features[visible] = feat_num[visible] / eta[visible, None]
    weights[visible] = weight_num[visible] / eta[visible]
    return VertexProjection(features, weights, visible)
