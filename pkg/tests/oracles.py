"""Independent reference implementations used as test oracles.

Everything here is written against the documented camera/math
conventions from scratch (ray casting, 2D area ratios, direct formula
evaluation) so library results are checked through a second route.
"""

from __future__ import annotations

import numpy as np


def area_ratio_barycentric(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """2D barycentrics of point p in triangle (a, b, c) via signed areas."""

    def signed_area(p0, p1, p2):
        return 0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))

    total = signed_area(a, b, c)
    return np.array(
        [
            signed_area(p, b, c) / total,
            signed_area(a, p, c) / total,
            signed_area(a, b, p) / total,
        ]
    )


def ray_triangle(origin, direction, v0, v1, v2):
    """Moller-Trumbore intersection.

    Returns (t, bary) with bary the (3,) barycentric triple of the hit
    point, or None when the ray misses the triangle plane region.
    """
    e1, e2 = v1 - v0, v2 - v0
    pvec = np.cross(direction, e2)
    det = float(e1 @ pvec)
    if abs(det) < 1e-14:
        return None
    inv = 1.0 / det
    tvec = origin - v0
    u = float(tvec @ pvec) * inv
    qvec = np.cross(tvec, e1)
    v = float(direction @ qvec) * inv
    if u < -1e-9 or v < -1e-9 or u + v > 1.0 + 1e-9:
        return None
    t = float(e2 @ qvec) * inv
    if t <= 0:
        return None
    return t, np.array([1.0 - u - v, u, v])


def raycast_fragment(mesh, camera, row: int, col: int):
    """Cast the pixel-center ray against every face; nearest hit wins.

    Returns (face_index, bary, distance) or None for background.
    """
    direction = camera.pixel_rays(np.array([row]), np.array([col]))[0]
    best = None
    for fi, (ia, ib, ic) in enumerate(mesh.faces):
        hit = ray_triangle(
            camera.eye, direction, mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]
        )
        if hit is None:
            continue
        t, bary = hit
        if best is None or t < best[2]:
            best = (fi, bary, t)
    return best


def interpolate_pixel(mesh, frag, values, row: int, col: int) -> np.ndarray:
    """Direct single-pixel evaluation of the barycentric rendering rule."""
    fi = frag.face_index[row, col]
    assert fi >= 0
    ia, ib, ic = mesh.faces[fi]
    a1, a2, a3 = frag.barycentric[row, col]
    return a1 * values[ia] + a2 * values[ib] + a3 * values[ic]


def softmax_attention(rows: np.ndarray, temperature: float) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force softmax attention with explicit loops."""
    n = len(rows)
    weights = np.zeros((n, n))
    for i in range(n):
        logits = np.array([float(rows[i] @ rows[k]) * temperature for k in range(n)])
        e = np.exp(logits - logits.max())
        weights[i] = e / e.sum()
    return weights @ rows, weights


def recombination_variance(mesh, frag, features: np.ndarray) -> np.ndarray:
    """Empirical per-channel variance of the per-pixel barycentric mix."""
    fg = frag.foreground
    tri = mesh.faces[frag.face_index[fg]]
    bary = frag.barycentric[fg]
    recombined = (
        bary[:, 0, None] * features[tri[:, 0]]
        + bary[:, 1, None] * features[tri[:, 1]]
        + bary[:, 2, None] * features[tri[:, 2]]
    )
    return recombined.var(axis=0)
