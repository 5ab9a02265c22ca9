"""Software triangle rasterizer producing per-pixel fragment buffers.

One fragment per pixel: the nearest face at the pixel center wins the
depth test, with perspective-correct barycentric coordinates and the
Euclidean camera-to-surface distance as depth. Back-facing triangles are
rasterized unless culling is requested; the depth test sorts them out.
Identical inputs yield bit-identical buffers (faces are visited in index
order and ties keep the earlier face).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .mesh import Mesh

BACKGROUND = -1


@dataclass
class FragmentBuffer:
    face_index: np.ndarray   # (H, W) int32, -1 = background
    barycentric: np.ndarray  # (H, W, 3) float64
    depth: np.ndarray        # (H, W) float64, +inf on background

    @property
    def foreground(self) -> np.ndarray:
        return self.face_index >= 0

    @property
    def resolution(self) -> tuple[int, int]:
        h, w = self.face_index.shape
        return (w, h)


def rasterize(mesh: Mesh, camera: Camera, cull_backfaces: bool = False) -> FragmentBuffer:
    w_px, h_px = camera.resolution
    face_index = np.full((h_px, w_px), BACKGROUND, dtype=np.int32)
    bary = np.zeros((h_px, w_px, 3), dtype=np.float64)
    depth = np.full((h_px, w_px), np.inf, dtype=np.float64)

    uv, view_w = camera.project(mesh.vertices)
    eye = camera.eye
    verts = mesh.vertices

    for fi in range(mesh.face_count):
        ia, ib, ic = mesh.faces[fi]
        wa, wb, wc = view_w[ia], view_w[ib], view_w[ic]
        if wa <= 1e-9 or wb <= 1e-9 or wc <= 1e-9:
            continue  # no near-plane clipping; skip faces touching the camera plane
        if cull_backfaces:
            n = np.cross(verts[ib] - verts[ia], verts[ic] - verts[ia])
            centroid = (verts[ia] + verts[ib] + verts[ic]) / 3.0
            if np.dot(n, eye - centroid) <= 0.0:
                continue
        a, b, c = uv[ia], uv[ib], uv[ic]
        area = _cross2(b - a, c - a)
        if abs(area) < 1e-12:
            continue

        # over-cover the bounding box by one pixel; the inside test decides
        us = np.array([a[0], b[0], c[0]])
        vs = np.array([a[1], b[1], c[1]])
        c0 = max(0, int(np.floor(us.min() - 0.5)))
        c1 = min(w_px - 1, int(np.ceil(us.max() - 0.5)))
        r0 = max(0, int(np.floor(vs.min() - 0.5)))
        r1 = min(h_px - 1, int(np.ceil(vs.max() - 0.5)))
        if c0 > c1 or r0 > r1:
            continue

        cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
        px = np.stack([cols + 0.5, rows + 0.5], axis=-1).astype(np.float64)
        l0 = _cross2(c - b, px - b) / area
        l1 = _cross2(a - c, px - c) / area
        l2 = _cross2(b - a, px - a) / area
        inside = (l0 >= -1e-9) & (l1 >= -1e-9) & (l2 >= -1e-9)
        if not inside.any():
            continue

        l0, l1, l2 = l0[inside], l1[inside], l2[inside]
        rr, cc = rows[inside], cols[inside]
        # perspective correction: screen barycentrics over 1/w
        q0, q1, q2 = l0 / wa, l1 / wb, l2 / wc
        norm = q0 + q1 + q2
        a0, a1, a2 = q0 / norm, q1 / norm, q2 / norm
        pts = (
            a0[:, None] * verts[ia]
            + a1[:, None] * verts[ib]
            + a2[:, None] * verts[ic]
        )
        dist = np.linalg.norm(pts - eye, axis=1)

        closer = dist < depth[rr, cc]
        if not closer.any():
            continue
        rr, cc = rr[closer], cc[closer]
        depth[rr, cc] = dist[closer]
        face_index[rr, cc] = fi
        bary[rr, cc, 0] = a0[closer]
        bary[rr, cc, 1] = a1[closer]
        bary[rr, cc, 2] = a2[closer]

    return FragmentBuffer(face_index, bary, depth)


def _cross2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
