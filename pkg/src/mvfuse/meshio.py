"""ASCII OBJ reader and vertex-colored ASCII PLY writer/reader.

OBJ support is deliberately a subset: `v` lines and `f` lines with
1-based indices; polygon faces are fan-triangulated; texture/normal
references after `/` are ignored.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidInputError
from .mesh import Mesh


def loads_obj(text: str) -> Mesh:
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise InvalidInputError(f"line {lineno}: vertex needs 3 coordinates")
            vertices.append(tuple(float(p) for p in parts[1:4]))
        elif tag == "f":
            idx = []
            for token in parts[1:]:
                head = token.split("/")[0]
                value = int(head)
                if value <= 0:
                    raise InvalidInputError(f"line {lineno}: face indices must be positive 1-based")
                idx.append(value - 1)
            if len(idx) < 3:
                raise InvalidInputError(f"line {lineno}: face needs at least 3 vertices")
            for k in range(1, len(idx) - 1):  # fan triangulation
                faces.append((idx[0], idx[k], idx[k + 1]))
        # other tags (vn, vt, usemtl, o, g, s, mtllib) are ignored
    if not vertices:
        raise InvalidInputError("OBJ contains no vertices")
    return Mesh(np.asarray(vertices), np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def load_obj(path: str | os.PathLike) -> Mesh:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_obj(fh.read())


def save_ply(path: str | os.PathLike, mesh: Mesh, colors: np.ndarray | None = None) -> None:
    """Write an ASCII PLY with per-vertex RGB colors.

    `colors` are floats in [0, 1], (J, 3); defaults to the mesh's first
    three attribute channels.
    """
    if colors is None:
        if mesh.attributes is None or mesh.attributes.shape[1] < 3:
            raise InvalidInputError("no colors given and mesh lacks 3-channel attributes")
        colors = mesh.attributes[:, :3]
    colors = np.asarray(colors, dtype=np.float64)
    if colors.shape != (mesh.vertex_count, 3):
        raise InvalidInputError("colors must be (vertex_count, 3)")
    rgb = np.rint(np.clip(colors, 0.0, 1.0) * 255.0).astype(np.uint8)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.vertex_count}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        f"element face {mesh.face_count}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for (x, y, z), (r, g, b) in zip(mesh.vertices, rgb):
        lines.append(f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b}")
    for a, b, c in mesh.faces:
        lines.append(f"3 {a} {b} {c}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_ply(path: str | os.PathLike) -> tuple[Mesh, np.ndarray]:
    """Read the ASCII PLY subset written by :func:`save_ply`.

    Returns (mesh, colors) with colors as floats in [0, 1].
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != "ply":
        raise InvalidInputError("not a PLY file")
    n_vertex = n_face = 0
    body_at = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n_vertex = int(parts[2])
        elif parts[:2] == ["element", "face"]:
            n_face = int(parts[2])
        elif parts[:1] == ["end_header"]:
            body_at = i + 1
            break
    if body_at is None:
        raise InvalidInputError("PLY header missing end_header")
    verts = np.zeros((n_vertex, 3))
    colors = np.zeros((n_vertex, 3))
    for j in range(n_vertex):
        parts = lines[body_at + j].split()
        verts[j] = [float(p) for p in parts[:3]]
        colors[j] = [int(p) / 255.0 for p in parts[3:6]]
    faces = np.zeros((n_face, 3), dtype=np.int64)
    for j in range(n_face):
        parts = lines[body_at + n_vertex + j].split()
        if parts[0] != "3":
            raise InvalidInputError("only triangle faces supported")
        faces[j] = [int(p) for p in parts[1:4]]
    return Mesh(verts, faces), colors
