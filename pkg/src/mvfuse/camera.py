"""Look-at pinhole cameras on a viewing ring.

Convention: right-handed world with +Y up. A camera orbits the origin at
(azimuth, elevation, distance) and always aims at the origin; in camera
space the view axis is -Z, +X is right, +Y is up. `fov` is the vertical
field of view in degrees. Pixels are sampled at their centers
(col + 0.5, row + 0.5), with row 0 at the top of the image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidInputError

WORLD_UP = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class Camera:
    azimuth: float
    elevation: float
    distance: float
    fov: float
    resolution: tuple[int, int]  # (width, height) pixels

    def __post_init__(self):
        if self.distance <= 0:
            raise InvalidInputError("camera distance must be > 0")
        if not 0 < self.fov < 180:
            raise InvalidInputError("fov must lie in (0, 180) degrees")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise InvalidInputError("resolution must be at least 1x1")

    @cached_property
    def eye(self) -> np.ndarray:
        az = np.radians(self.azimuth)
        el = np.radians(self.elevation)
        return self.distance * np.array(
            [np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)]
        )

    @cached_property
    def world_to_camera(self) -> np.ndarray:
        """Rotation with rows (right, up, back); back = eye direction."""
        back = self.eye / np.linalg.norm(self.eye)
        up = WORLD_UP
        if abs(np.dot(back, up)) > 1.0 - 1e-9:  # looking straight up/down
            up = np.array([0.0, 0.0, 1.0])
        right = np.cross(up, back)
        right /= np.linalg.norm(right)
        true_up = np.cross(back, right)
        return np.stack([right, true_up, back])

    @property
    def width(self) -> int:
        return self.resolution[0]

    @property
    def height(self) -> int:
        return self.resolution[1]

    @cached_property
    def focal(self) -> float:
        return 1.0 / np.tan(np.radians(self.fov) / 2.0)

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project world points to pixel coordinates.

        Returns (uv, w): uv is (P, 2) in pixel units with u along columns
        and v along rows (top-down); w is the (P,) view-axis depth,
        positive in front of the camera. Points with w <= 0 get
        unreliable uv and must be rejected by the caller.
        """
        pts = np.atleast_2d(points)
        cam = (pts - self.eye) @ self.world_to_camera.T
        w = -cam[:, 2]
        safe = np.where(np.abs(w) < 1e-12, 1e-12, w)
        aspect = self.width / self.height
        x_ndc = self.focal * cam[:, 0] / safe / aspect
        y_ndc = self.focal * cam[:, 1] / safe
        u = (x_ndc + 1.0) * 0.5 * self.width
        v = (1.0 - y_ndc) * 0.5 * self.height
        return np.stack([u, v], axis=1), w

    def pixel_rays(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Unit world-space ray directions through pixel centers."""
        aspect = self.width / self.height
        x_ndc = (2.0 * (cols + 0.5) / self.width - 1.0) * aspect
        y_ndc = 1.0 - 2.0 * (rows + 0.5) / self.height
        d_cam = np.stack(
            [x_ndc / self.focal, y_ndc / self.focal, -np.ones_like(x_ndc)], axis=-1
        )
        d_world = d_cam @ self.world_to_camera
        return d_world / np.linalg.norm(d_world, axis=-1, keepdims=True)


def make_cameras(
    azimuths_deg,
    elevation: float = 0.0,
    distance: float = 2.5,
    fov: float = 50.0,
    resolution: tuple[int, int] = (32, 32),
) -> list[Camera]:
    """Cameras at explicit azimuths sharing elevation/distance/fov."""
    return [
        Camera(float(az), elevation, distance, fov, tuple(resolution))
        for az in azimuths_deg
    ]


def make_camera_ring(
    n_views: int,
    elevation: float = 0.0,
    distance: float = 2.5,
    fov: float = 50.0,
    resolution: tuple[int, int] = (32, 32),
    spacing_deg: float | None = None,
) -> list[Camera]:
    """Equidistant ring of cameras: azimuths 0, s, 2s, ... with s = 360/n.

    `spacing_deg` overrides the default full-circle spacing (used for
    partial rings such as 4 views at 90 degrees).
    """
    if n_views < 1:
        raise InvalidInputError("need at least one view")
    step = 360.0 / n_views if spacing_deg is None else float(spacing_deg)
    return make_cameras(
        [step * i for i in range(n_views)], elevation, distance, fov, resolution
    )
