import numpy as np
import pytest

from msflow.geometry import circle, constant_angle
from msflow.meshing import generate_mesh
from msflow.vtkio import (
    atomic_write_text,
    read_vtk,
    write_field_vtk,
    write_mesh_text,
    write_mesh_vtk,
)


@pytest.fixture(scope="module")
def mesh():
    return generate_mesh(circle(1.0), 0.25, constant_angle(2.0))


def test_mesh_vtk_round_trip(mesh, tmp_path):
    path = tmp_path / "mesh.vtk"
    write_mesh_vtk(path, mesh)
    pts, tris, data = read_vtk(path)
    assert np.allclose(pts, mesh.nodes)
    assert np.array_equal(tris, mesh.triangles)
    assert data == {}
    head = path.read_text().splitlines()
    assert head[0] == "# vtk DataFile Version 3.0"
    assert head[2] == "ASCII"
    assert head[3] == "DATASET UNSTRUCTURED_GRID"


def test_field_vtk_round_trip(mesh, tmp_path):
    path = tmp_path / "field.vtk"
    u = np.sin(mesh.nodes[:, 0])
    v = mesh.nodes[:, 1] ** 2
    write_field_vtk(path, mesh, {"u": u, "extra": v})
    pts, tris, data = read_vtk(path)
    assert set(data) == {"u", "extra"}
    assert np.array_equal(data["u"], u)  # %.17g round-trips doubles
    assert np.array_equal(data["extra"], v)


def test_plain_text_format(mesh, tmp_path):
    path = tmp_path / "mesh.txt"
    write_mesh_text(path, mesh)
    tokens = path.read_text().split()
    n = int(tokens[0])
    assert n == mesh.n_nodes
    coords = np.array(tokens[1:1 + 2 * n], dtype=float).reshape(n, 2)
    assert np.allclose(coords, mesh.nodes)
    pos = 1 + 2 * n
    m = int(tokens[pos])
    assert m == mesh.n_triangles
    tris = np.array(tokens[pos + 1:pos + 1 + 3 * m], dtype=int).reshape(m, 3)
    assert np.array_equal(tris, mesh.triangles)
    pos = pos + 1 + 3 * m
    nb = int(tokens[pos])
    assert nb == mesh.n_boundary


def test_writes_are_byte_deterministic(mesh, tmp_path):
    a, b = tmp_path / "a.vtk", tmp_path / "b.vtk"
    u = np.cos(3.0 * mesh.nodes[:, 0])
    write_field_vtk(a, mesh, {"u": u})
    write_field_vtk(b, mesh, {"u": u})
    assert a.read_bytes() == b.read_bytes()


def test_atomic_write_leaves_no_tmp(tmp_path):
    target = tmp_path / "out" / "file.txt"
    atomic_write_text(target, "hello\n")
    assert target.read_text() == "hello\n"
    assert list(target.parent.glob("*.tmp")) == []
