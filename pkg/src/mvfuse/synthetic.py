"""Procedural target textures and the toy latent decoder.

A target generator maps 3D surface points to C-channel values in [0, 1],
so per-view target planes are cross-view consistent by construction. The
decoder upsamples a latent plane and takes its first three channels as
RGB, standing in for a learned latent-to-image decoder.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .mesh import Mesh
from .projection import FeatureImage, surface_points
from .raster import FragmentBuffer

FieldFn = Callable[[np.ndarray], np.ndarray]

TARGET_KINDS = ("checker", "gradient", "noise")


def value_field(kind: str, channels: int = 4, seed: int = 0, cells: float = 0.5) -> FieldFn:
    """Build a procedural field f(points (P, 3)) -> (P, C) in [0, 1]."""
    rng = np.random.default_rng(seed)
    if kind == "checker":
        palette = rng.uniform(0.1, 0.9, size=(2, channels))

        def field(points: np.ndarray) -> np.ndarray:
            parity = np.floor((points + 1.0) / cells).sum(axis=1).astype(np.int64) % 2
            return palette[parity]

    elif kind == "gradient":
        dirs = rng.standard_normal((channels, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

        def field(points: np.ndarray) -> np.ndarray:
            ramp = points @ dirs.T / np.sqrt(3.0)  # points in [-1,1]^3
            return np.clip((ramp + 1.0) / 2.0, 0.0, 1.0)

    elif kind == "noise":
        res = 5
        grid = rng.uniform(0.0, 1.0, size=(res, res, res, channels))

        def field(points: np.ndarray) -> np.ndarray:
            coords = np.clip((points + 1.0) / 2.0, 0.0, 1.0) * (res - 1)
            out = np.empty((len(points), channels))
            for c in range(channels):
                out[:, c] = ndimage.map_coordinates(
                    grid[..., c], coords.T, order=1, mode="nearest"
                )
            return out

    else:
        raise ConfigError(f"unknown target kind {kind!r}; expected one of {TARGET_KINDS}")
    return field


def render_targets(
    mesh: Mesh, frags: Sequence[FragmentBuffer], field: FieldFn
) -> list[FeatureImage]:
    """Evaluate the field at each view's surface points; background is 0."""
    planes = []
    for frag in frags:
        fg = frag.foreground
        probe = field(np.zeros((1, 3)))
        data = np.zeros(fg.shape + (probe.shape[1],))
        if fg.any():
            data[fg] = field(surface_points(mesh, frag))
        planes.append(FeatureImage(data, fg))
    return planes


def decode_to_rgb(latent: np.ndarray, size: int) -> np.ndarray:
    """Bilinear-upsample a latent plane and clip its first 3 channels."""
    h, w = latent.shape[:2]
    rgb = latent[:, :, :3]
    if (h, w) != (size, size):
        rgb = ndimage.zoom(rgb, (size / h, size / w, 1.0), order=1)
    return np.clip(rgb, 0.0, 1.0)
