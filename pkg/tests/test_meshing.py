import math

import numpy as np
import pytest

from msflow.errors import BadSpec
from msflow.geometry import circle, constant_angle, ellipse
from msflow.meshing import generate_mesh, mesh_quality_report

ALPHA = constant_angle(2.0)


@pytest.fixture(scope="module")
def disk_mesh():
    return generate_mesh(circle(1.0), 0.2, ALPHA)


@pytest.fixture(scope="module")
def ellipse_mesh():
    return generate_mesh(ellipse(1.5, 1.0), 0.1, ALPHA)


def test_boundary_node_count(disk_mesh):
    # ceil(perimeter / h) boundary nodes at uniform arc length
    assert disk_mesh.n_boundary == math.ceil(2.0 * math.pi / 0.2) == 32


def test_area_within_one_percent(disk_mesh):
    assert abs(disk_mesh.triangle_areas().sum() - math.pi) < 0.01 * math.pi


def test_all_triangles_positively_oriented(disk_mesh, ellipse_mesh):
    for mesh in (disk_mesh, ellipse_mesh):
        assert np.all(mesh.triangle_areas() > 0)


def _edge_set(mesh):
    edges = set()
    for tri in mesh.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            edges.add((min(tri[a], tri[b]), max(tri[a], tri[b])))
    return edges


def test_euler_formula_disk_topology(disk_mesh, ellipse_mesh):
    for mesh in (disk_mesh, ellipse_mesh):
        v = mesh.n_nodes
        e = len(_edge_set(mesh))
        f = mesh.n_triangles
        assert v - e + f == 1


def test_boundary_edges_form_single_closed_cycle(ellipse_mesh):
    edges = ellipse_mesh.boundary_edges
    nb = ellipse_mesh.n_boundary
    assert edges.shape == (nb, 2)
    assert np.array_equal(edges[:, 0], np.arange(nb))
    assert np.array_equal(edges[:, 1], (np.arange(nb) + 1) % nb)


def test_quality_report(disk_mesh):
    q = mesh_quality_report(disk_mesh)
    assert q.delaunay_violations == 0
    assert q.min_angle_deg >= 20.0
    assert q.min_edge_length > 0.05
    assert q.area_defect < 0.01 * math.pi


def test_quality_holds_on_finer_meshes():
    for curve, h in ((circle(1.0), 0.05), (ellipse(1.5, 1.0), 0.05)):
        q = mesh_quality_report(generate_mesh(curve, h, ALPHA))
        assert q.delaunay_violations == 0
        assert q.min_angle_deg >= 20.0


def test_too_coarse_spacing_rejected():
    with pytest.raises(BadSpec):
        generate_mesh(circle(1.0), 2.0, ALPHA)
    with pytest.raises(BadSpec):
        generate_mesh(circle(1.0), -0.1, ALPHA)


def test_area_defect_second_order(disk_mesh):
    q1 = mesh_quality_report(disk_mesh)
    q2 = mesh_quality_report(generate_mesh(circle(1.0), 0.1, ALPHA))
    ratio = q1.area_defect / q2.area_defect
    assert 3.0 <= ratio <= 5.0
    blen_ratio = q1.boundary_length_defect / q2.boundary_length_defect
    assert 3.0 <= blen_ratio <= 5.0


def test_boundary_arclength_sum_near_perimeter(disk_mesh):
    total = disk_mesh.boundary_edge_length.sum()
    # chord total undershoots the perimeter by O(h^2)
    assert 0 < disk_mesh.domain_perimeter - total < 2.0 * 0.2 ** 2


def test_cos_alpha_trace_data(disk_mesh):
    assert disk_mesh.boundary_cos_alpha is not None
    assert np.allclose(disk_mesh.boundary_cos_alpha, math.cos(2.0))
    assert np.allclose(disk_mesh.edge_cos_alpha(constant_angle(math.pi / 3)),
                       0.5)


def test_mesh_generation_deterministic():
    a = generate_mesh(circle(1.0), 0.15, ALPHA, seed=3)
    b = generate_mesh(circle(1.0), 0.15, ALPHA, seed=3)
    assert np.array_equal(a.nodes, b.nodes)
    assert np.array_equal(a.triangles, b.triangles)


def test_mesh_arrays_immutable(disk_mesh):
    with pytest.raises(ValueError):
        disk_mesh.nodes[0, 0] = 99.0


def test_boundary_triangle_of_edge(disk_mesh):
    owners = disk_mesh.boundary_triangle_of_edge()
    assert owners.shape == (disk_mesh.n_boundary,)
    for j, (i0, i1) in enumerate(disk_mesh.boundary_edges):
        tri = set(disk_mesh.triangles[owners[j]])
        assert {i0, i1} <= tri
