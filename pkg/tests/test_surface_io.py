import logging

import numpy as np
import pytest

from papillae.mesh import MeshError
from papillae.primitives import icosphere
from papillae.surface_io import MeshParseError, load_surface, save_surface


def write(path, text):
    path.write_text(text)
    return str(path)


def test_single_triangle_ascii_ply(tmp_path):
    p = write(tmp_path / "t.ply", "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
              "property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n"
              "end_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    m = load_surface(p)
    assert m.n_vertices == 3 and m.n_faces == 1 and m.boundary_flags.all()


def test_tetrahedron_obj(tmp_path):
    p = write(tmp_path / "t.obj", "# tet\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
              "f 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n")
    m = load_surface(p)
    assert (m.n_vertices, m.n_faces) == (4, 4)
    assert not m.boundary_flags.any()


def test_out_of_range_index(tmp_path):
    p = write(tmp_path / "bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 100\n")
    with pytest.raises(MeshError, match="99"):
        load_surface(p)
    q = write(tmp_path / "bad.ply", "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\n"
              "property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n"
              "end_header\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 99\n")
    with pytest.raises(MeshError, match="99"):
        load_surface(q)


def test_parse_errors_carry_location(tmp_path):
    p = write(tmp_path / "x.obj", "v 0 0 0\nv 1 zero 0\n")
    with pytest.raises(MeshParseError, match="line 2"):
        load_surface(p)
    q = write(tmp_path / "x.ply", "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
              "property float z\nend_header\n0 0 0\n")
    with pytest.raises(MeshParseError, match="line"):
        load_surface(q)
    r = write(tmp_path / "y.ply", "not a ply\n")
    with pytest.raises(MeshParseError):
        load_surface(r)


def test_empty_mesh_rejected(tmp_path):
    p = write(tmp_path / "e.obj", "# nothing\n")
    with pytest.raises(MeshError, match="no vertices"):
        load_surface(p)


def test_missing_file_and_unknown_format(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_surface(str(tmp_path / "none.ply"))
    p = write(tmp_path / "m.stl", "solid\n")
    with pytest.raises(MeshParseError, match="unsupported"):
        load_surface(p)


def test_polygons_fan_triangulated_and_degenerates_dropped(tmp_path, caplog):
    p = write(tmp_path / "q.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\nf 1 1 2\n")
    with caplog.at_level(logging.WARNING):
        m = load_surface(p)
    assert m.faces.tolist() == [[0, 1, 2], [0, 2, 3]]
    assert "degenerate" in caplog.text


@pytest.mark.parametrize("name,binary", [("a.ply", False), ("b.ply", True), ("c.obj", False)])
def test_round_trip_bit_exact(tmp_path, name, binary):
    rng = np.random.default_rng(3)
    m = icosphere(2, radius=123.456)
    m = m.transformed(translation=rng.normal(size=3) * 1e3)
    path = str(tmp_path / name)
    save_surface(m, path, binary=binary)
    back = load_surface(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.faces, m.faces)
    save_surface(back, path, binary=binary)
    assert np.array_equal(load_surface(path).vertices, m.vertices)


def test_binary_ply_float32_and_extra_properties(tmp_path):
    v = np.array([(0, 0, 0, 7), (1, 0, 0, 7), (0, 1, 0, 7)],
                 dtype=[("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("c", "u1")])
    f = np.zeros(1, dtype=[("n", "u1"), ("i", "<i4", 3), ("flag", "u1")])
    f["n"], f["i"] = 3, [0, 1, 2]
    head = ("ply\nformat binary_little_endian 1.0\ncomment made by hand\nelement vertex 3\nproperty float x\n"
            "property float y\nproperty float z\nproperty uchar c\nelement face 1\n"
            "property list uchar int vertex_indices\nproperty uchar flag\nend_header\n")
    path = tmp_path / "f.ply"
    path.write_bytes(head.encode() + v.tobytes() + f.tobytes())
    m = load_surface(str(path))
    assert m.faces.tolist() == [[0, 1, 2]]
    assert m.vertices[1].tolist() == [1.0, 0.0, 0.0]
