"""Taylor-Hood space builder: dof bookkeeping, interpolation, mean handling."""
import numpy as np
import pytest

from porolab.mesh import BcLayout, build_unit_square_mesh
from porolab.spaces import (Field, PressureConstraint, SpaceKind, build_spaces,
                            interpolate, mean_value, zero_mean_project)

LAYOUTS = [BcLayout.ALL_DIRICHLET, BcLayout.ALL_NEUMANN, BcLayout.MIXED_LEFT_DIRICHLET]


@pytest.mark.parametrize("n", [1, 2, 4])
def test_dof_counts(n):
    spaces = build_spaces(build_unit_square_mesh(n, BcLayout.ALL_DIRICHLET))
    # P2 scalar grid has one node per fine-grid point of the doubled lattice
    assert spaces.n_u_dofs == 2 * (2 * n + 1) ** 2
    assert spaces.n_p_dofs == (n + 1) ** 2
    assert spaces.tri_p2.shape == (2 * n * n, 6)


def test_p2_nodes_include_edge_midpoints():
    spaces = build_spaces(build_unit_square_mesh(3, BcLayout.ALL_DIRICHLET))
    verts = spaces.mesh.vertices
    for tri, tri6 in zip(spaces.mesh.triangles, spaces.tri_p2):
        corner_xy = spaces.p2_coords[tri6[:3]]
        np.testing.assert_allclose(corner_xy, verts[tri], atol=1e-14)
        mids = spaces.p2_coords[tri6[3:]]
        expected = 0.5 * (verts[tri] + verts[np.roll(tri, -1)])
        np.testing.assert_allclose(mids, expected, atol=1e-14)


def test_shared_edge_midpoints_are_shared_dofs():
    spaces = build_spaces(build_unit_square_mesh(4, BcLayout.ALL_DIRICHLET))
    seen = {}
    for tri6 in spaces.tri_p2:
        for node in tri6[3:]:
            key = tuple(np.round(spaces.p2_coords[node], 12))
            assert seen.setdefault(key, node) == node


@pytest.mark.parametrize("layout", LAYOUTS)
def test_displacement_clamped_on_whole_boundary(layout):
    spaces = build_spaces(build_unit_square_mesh(3, layout))
    constrained_nodes = np.unique(spaces.u_constrained // 2)
    xy = spaces.p2_coords[constrained_nodes]
    on_edge = (np.isclose(xy, 0.0) | np.isclose(xy, 1.0)).any(axis=1)
    assert on_edge.all()
    # both components of every boundary P2 node are clamped regardless of layout
    assert len(spaces.u_constrained) == 2 * (4 * (2 * 3))
    assert len(spaces.u_free) + len(spaces.u_constrained) == spaces.n_u_dofs


def test_pressure_constraint_kind_per_layout():
    kinds = {
        BcLayout.ALL_DIRICHLET: PressureConstraint.DIRICHLET_NODES,
        BcLayout.MIXED_LEFT_DIRICHLET: PressureConstraint.DIRICHLET_NODES,
        BcLayout.ALL_NEUMANN: PressureConstraint.ZERO_MEAN,
    }
    for layout, kind in kinds.items():
        spaces = build_spaces(build_unit_square_mesh(3, layout))
        assert spaces.pressure_constraint is kind
        if kind is PressureConstraint.ZERO_MEAN:
            assert len(spaces.p_free) == spaces.n_p_dofs
        else:
            assert len(spaces.p_free) + len(spaces.p_constrained) == spaces.n_p_dofs


def test_interpolate_is_nodal():
    spaces = build_spaces(build_unit_square_mesh(3, BcLayout.ALL_DIRICHLET))
    f = lambda x, y: np.sin(x) * np.cosh(y)
    field = interpolate(spaces, SpaceKind.PRESSURE, f)
    xv, yv = spaces.mesh.vertices.T
    np.testing.assert_allclose(field.values, f(xv, yv), atol=1e-15)

    g = lambda x, y: np.stack([x * y, x - y])
    ufield = interpolate(spaces, SpaceKind.DISPLACEMENT, g)
    xs, ys = spaces.p2_coords.T
    # interleaved components; boundary entries are clamped to exact zero
    expected = np.empty(spaces.n_u_dofs)
    expected[0::2] = xs * ys
    expected[1::2] = xs - ys
    expected[spaces.u_constrained] = 0.0
    np.testing.assert_allclose(ufield.values, expected, atol=1e-15)
    assert np.all(ufield.values[spaces.u_constrained] == 0.0)


def test_mean_value_of_linear_field():
    spaces = build_spaces(build_unit_square_mesh(4, BcLayout.ALL_NEUMANN))
    field = interpolate(spaces, SpaceKind.PRESSURE, lambda x, y: 2.0 + 3.0 * x - y)
    # integral of 2 + 3x - y over the unit square is 3, and P1 holds it exactly
    np.testing.assert_allclose(mean_value(spaces, field), 3.0, rtol=1e-13)


def test_zero_mean_project_idempotent_on_random_fields():
    rng = np.random.default_rng(20260819)
    spaces = build_spaces(build_unit_square_mesh(5, BcLayout.ALL_NEUMANN))
    for _ in range(10):
        field = Field(SpaceKind.PRESSURE, rng.standard_normal(spaces.n_p_dofs))
        proj = zero_mean_project(spaces, field)
        assert abs(mean_value(spaces, proj)) < 1e-13
        again = zero_mean_project(spaces, proj)
        np.testing.assert_allclose(again.values, proj.values, atol=1e-14)
        # projection only shifts by a constant
        shift = field.values - proj.values
        np.testing.assert_allclose(shift, shift[0], atol=1e-13)
