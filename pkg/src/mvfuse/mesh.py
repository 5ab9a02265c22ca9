"""Triangle mesh container and geometry operations.

Vertices live in scene units; :func:`normalize_mesh` maps them into the
canonical [-1, 1] cube that every downstream stage assumes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError

log = logging.getLogger(__name__)


@dataclass
class Mesh:
    """Indexed triangle mesh with optional per-vertex normals and attributes.

    vertices: (J, 3) float positions
    faces: (F, 3) integer vertex-index triples
    normals: (J, 3) unit vectors or None
    attributes: (J, C) per-vertex feature rows or None
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray | None = None
    attributes: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size:
            if self.faces.min() < 0:
                raise InvalidInputError("negative face index")
            if self.faces.max() >= len(self.vertices):
                raise InvalidInputError("face index exceeds vertex count")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(self.normals) != len(self.vertices):
                raise InvalidInputError("normal count must match vertex count")
        if self.attributes is not None:
            self.attributes = np.asarray(self.attributes, dtype=np.float64)
            if self.attributes.ndim == 1:
                self.attributes = self.attributes[:, None]
            if len(self.attributes) != len(self.vertices):
                raise InvalidInputError("attribute count must match vertex count")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def with_attributes(self, attributes: np.ndarray) -> "Mesh":
        return replace(self, attributes=attributes)


def normalize_mesh(mesh: Mesh) -> Mesh:
    """Center the mesh at the origin and scale it so max |coordinate| == 1.

    Centering uses the bounding-box midpoint. A degenerate mesh (zero
    extent) is centered but left unscaled.
    """
    if mesh.vertex_count == 0:
        raise InvalidInputError("cannot normalize an empty mesh")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    centered = mesh.vertices - (lo + hi) / 2.0
    extent = np.abs(centered).max()
    if extent > 0:
        centered = centered / extent
    return replace(mesh, vertices=centered)


def face_normals(mesh: Mesh) -> np.ndarray:
    """Unnormalized face normals; magnitude is twice the face area."""
    v0 = mesh.vertices[mesh.faces[:, 0]]
    v1 = mesh.vertices[mesh.faces[:, 1]]
    v2 = mesh.vertices[mesh.faces[:, 2]]
    return np.cross(v1 - v0, v2 - v0)


def compute_vertex_normals(mesh: Mesh) -> Mesh:
    """Area-weighted average of incident face normals, unit length.

    Vertices with no well-defined normal (isolated, or only degenerate
    faces) fall back to +Z; the count is reported through the module
    logger.
    """
    fnorm = face_normals(mesh)  # cross-product magnitude carries the area weight
    acc = np.zeros_like(mesh.vertices)
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], fnorm)
    length = np.linalg.norm(acc, axis=1)
    bad = length < 1e-12
    if bad.any():
        log.warning("%d vertices without a usable normal, falling back to +Z", int(bad.sum()))
        acc[bad] = (0.0, 0.0, 1.0)
        length[bad] = 1.0
    return replace(mesh, normals=acc / length[:, None])


def subdivide(mesh: Mesh, levels: int = 1) -> Mesh:
    """Midpoint 4:1 subdivision (no smoothing pass).

    Each edge gains one midpoint vertex and each face splits into four,
    so refined vertices stay on the original surface. Attributes are
    averaged onto midpoints; normals are recomputed when present.
    """
    out = mesh
    for _ in range(levels):
        out = _subdivide_once(out)
    if mesh.normals is not None and levels > 0:
        out = compute_vertex_normals(out)
    return out


def _subdivide_once(mesh: Mesh) -> Mesh:
    verts = [mesh.vertices]
    attrs = [mesh.attributes] if mesh.attributes is not None else None
    midpoint: dict[tuple[int, int], int] = {}
    next_index = mesh.vertex_count
    new_vertices = []
    new_attrs = []

    def mid(a: int, b: int) -> int:
        nonlocal next_index
        key = (a, b) if a < b else (b, a)
        idx = midpoint.get(key)
        if idx is None:
            idx = next_index
            midpoint[key] = idx
            next_index += 1
            new_vertices.append((mesh.vertices[a] + mesh.vertices[b]) / 2.0)
            if attrs is not None:
                new_attrs.append((mesh.attributes[a] + mesh.attributes[b]) / 2.0)
        return idx

    faces = []
    for a, b, c in mesh.faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        faces.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])

    if new_vertices:
        verts.append(np.asarray(new_vertices))
        if attrs is not None:
            attrs.append(np.asarray(new_attrs))
    vertices = np.concatenate(verts, axis=0)
    attributes = np.concatenate(attrs, axis=0) if attrs is not None else None
    return Mesh(vertices, np.asarray(faces, dtype=np.int64), attributes=attributes)


def icosphere(level: int = 2, radius: float = 1.0) -> Mesh:
    """Unit icosphere: subdivided icosahedron projected onto a sphere.

    Vertex counts by level: 12, 42, 162, 642, 2562, ...
    """
    if level < 0:
        raise InvalidInputError("subdivision level must be >= 0")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ],
        dtype=np.int64,
    )
    mesh = Mesh(verts, faces)
    for _ in range(level):
        mesh = _subdivide_once(mesh)
        mesh.vertices /= np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
    mesh.vertices /= np.linalg.norm(mesh.vertices, axis=1, keepdims=True)
    mesh.vertices *= radius
    return compute_vertex_normals(mesh)
