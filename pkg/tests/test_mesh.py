"""Structured unit-square mesh: counts, orientation, boundary classification."""
import numpy as np
import pytest

from porolab.mesh import (BcLayout, EdgeTag, boundary_vertex_ids, build_unit_square_mesh,
                          dirichlet_vertex_ids, mesh_stats, triangle_areas)

LAYOUTS = [BcLayout.ALL_DIRICHLET, BcLayout.ALL_NEUMANN, BcLayout.MIXED_LEFT_DIRICHLET]


@pytest.mark.parametrize("n", [1, 2, 3, 4, 8])
def test_entity_counts(n):
    mesh = build_unit_square_mesh(n, BcLayout.ALL_DIRICHLET)
    assert mesh.vertices.shape == ((n + 1) ** 2, 2)
    assert mesh.triangles.shape == (2 * n * n, 3)
    assert mesh.boundary_edges.shape == (4 * n, 2)
    assert mesh.n == n


@pytest.mark.parametrize("n", [1, 2, 5])
def test_orientation_and_total_area(n):
    mesh = build_unit_square_mesh(n, BcLayout.ALL_DIRICHLET)
    areas = triangle_areas(mesh)
    # CCW orientation: every signed area positive, and they tile the square
    assert np.all(areas > 0.0)
    np.testing.assert_allclose(areas.sum(), 1.0, rtol=0, atol=1e-14)
    np.testing.assert_allclose(areas, 0.5 / n**2, rtol=1e-13)


def test_mesh_stats_closed_forms():
    n = 6
    stats = mesh_stats(build_unit_square_mesh(n, BcLayout.ALL_NEUMANN))
    np.testing.assert_allclose(stats["h_max"], np.sqrt(2.0) / n, rtol=1e-14)
    np.testing.assert_allclose(stats["total_area"], 1.0, atol=1e-14)
    assert stats["num_vertices"] == (n + 1) ** 2
    assert stats["num_triangles"] == 2 * n * n
    assert stats["num_boundary_edges"] == 4 * n


@pytest.mark.parametrize("layout", LAYOUTS)
def test_boundary_vertices_lie_on_boundary(layout):
    mesh = build_unit_square_mesh(5, layout)
    ids = boundary_vertex_ids(mesh)
    assert len(ids) == 4 * 5
    xy = mesh.vertices[ids]
    on_edge = (np.isclose(xy, 0.0) | np.isclose(xy, 1.0)).any(axis=1)
    assert on_edge.all()
    interior = np.setdiff1d(np.arange(len(mesh.vertices)), ids)
    xy_in = mesh.vertices[interior]
    assert np.all((xy_in > 0.0) & (xy_in < 1.0))


def test_edge_tags_match_layout():
    mesh = build_unit_square_mesh(4, BcLayout.ALL_DIRICHLET)
    assert all(t is EdgeTag.PRESSURE_DIRICHLET for t in mesh.edge_tags)

    mesh = build_unit_square_mesh(4, BcLayout.ALL_NEUMANN)
    assert all(t is EdgeTag.PRESSURE_NEUMANN for t in mesh.edge_tags)

    mesh = build_unit_square_mesh(4, BcLayout.MIXED_LEFT_DIRICHLET)
    for edge, tag in zip(mesh.boundary_edges, mesh.edge_tags):
        on_left = np.allclose(mesh.vertices[list(edge), 0], 0.0)
        assert tag is (EdgeTag.PRESSURE_DIRICHLET if on_left else EdgeTag.PRESSURE_NEUMANN)


def test_pressure_dirichlet_vertices_per_layout():
    n = 4
    full = set(boundary_vertex_ids(build_unit_square_mesh(n, BcLayout.ALL_DIRICHLET)))

    mesh = build_unit_square_mesh(n, BcLayout.ALL_DIRICHLET)
    assert set(dirichlet_vertex_ids(mesh)) == full

    mesh = build_unit_square_mesh(n, BcLayout.ALL_NEUMANN)
    assert len(dirichlet_vertex_ids(mesh)) == 0

    mesh = build_unit_square_mesh(n, BcLayout.MIXED_LEFT_DIRICHLET)
    ids = dirichlet_vertex_ids(mesh)
    assert len(ids) == n + 1
    assert np.allclose(mesh.vertices[ids, 0], 0.0)


def test_mesh_is_deterministic():
    a = build_unit_square_mesh(3, BcLayout.ALL_DIRICHLET)
    b = build_unit_square_mesh(3, BcLayout.ALL_DIRICHLET)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.boundary_edges, b.boundary_edges)
