import numpy as np
import pytest

from mvfuse import InvalidInputError, icosphere, load_obj, load_ply, loads_obj, save_ply

OBJ_QUAD = """
# comment line
v 0.0 0.0 0.0
v 1.0 0.0 0.0
v 1.0 1.0 0.0
v 0.0 1.0 0.0
f 1 2 3 4
"""

OBJ_SLASHES = """
v 0 0 0
v 1 0 0
v 0 1 0
vn 0 0 1
vt 0 0
f 1/1/1 2/1/1 3/1/1
"""


def test_obj_quad_fan_triangulated():
    mesh = loads_obj(OBJ_QUAD)
    assert mesh.vertex_count == 4
    assert np.array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])


def test_obj_ignores_slash_references():
    mesh = loads_obj(OBJ_SLASHES)
    assert mesh.face_count == 1
    assert np.array_equal(mesh.faces[0], [0, 1, 2])


def test_obj_rejects_non_positive_indices():
    with pytest.raises(InvalidInputError):
        loads_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n")


def test_obj_rejects_empty():
    with pytest.raises(InvalidInputError):
        loads_obj("# nothing here\n")


def test_obj_file_round_trip(tmp_path):
    path = tmp_path / "quad.obj"
    path.write_text(OBJ_QUAD)
    mesh = load_obj(path)
    assert mesh.vertex_count == 4


def test_ply_round_trip(tmp_path, rng):
    mesh = icosphere(1)
    colors = rng.uniform(0, 1, size=(mesh.vertex_count, 3))
    path = tmp_path / "sphere.ply"
    save_ply(path, mesh, colors)
    loaded, loaded_colors = load_ply(path)
    assert np.allclose(loaded.vertices, mesh.vertices, atol=1e-6)
    assert np.array_equal(loaded.faces, mesh.faces)
    # colors quantized to 8 bits on write
    assert np.allclose(loaded_colors, colors, atol=1.0 / 255.0 + 1e-9)


def test_ply_colors_clipped_and_quantized(tmp_path):
    mesh = icosphere(0)
    colors = np.full((mesh.vertex_count, 3), 1.7)
    path = tmp_path / "clip.ply"
    save_ply(path, mesh, colors)
    _, loaded_colors = load_ply(path)
    assert np.allclose(loaded_colors, 1.0)


def test_save_ply_requires_colors(tmp_path):
    with pytest.raises(InvalidInputError):
        save_ply(tmp_path / "x.ply", icosphere(0))
