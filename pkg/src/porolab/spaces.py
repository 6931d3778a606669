"""Discrete spaces for the mixed pair: quadratic vector displacement / linear pressure.

Displacement dofs live at vertices and edge midpoints, two components per
node, clamped on the whole boundary. Pressure dofs live at vertices; the
constraint is either a Dirichlet node set or a single zero-mean condition,
depending on the boundary layout.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .mesh import BcLayout, TriMesh, boundary_vertex_ids, dirichlet_vertex_ids, triangle_areas


class SpaceKind(Enum):
    DISPLACEMENT = "displacement"
    PRESSURE = "pressure"


class PressureConstraint(Enum):
    DIRICHLET_NODES = "dirichlet_nodes"
    ZERO_MEAN = "zero_mean"


@dataclass
class Field:
    """Coefficient vector of a finite-element function."""

    kind: SpaceKind
    values: np.ndarray

    def copy(self) -> "Field":
        return Field(self.kind, self.values.copy())


@dataclass(frozen=True)
class Spaces:
    """Dof bookkeeping for one mesh.

    tri_p2 : (nt, 6) quadratic node ids per triangle
             ordered [v0, v1, v2, mid01, mid12, mid20]
    p2_coords : (n_p2_nodes, 2) node coordinates (vertices first, then midpoints)
    u_constrained / u_free : displacement dof index arrays (dof = 2*node + comp)
    p_constrained / p_free : pressure dof (= vertex) index arrays
    """

    mesh: TriMesh
    tri_p2: np.ndarray
    p2_coords: np.ndarray
    n_u_dofs: int
    n_p_dofs: int
    u_constrained: np.ndarray
    u_free: np.ndarray
    p_constrained: np.ndarray
    p_free: np.ndarray
    pressure_constraint: PressureConstraint


def build_spaces(mesh: TriMesh) -> Spaces:
    nv = mesh.vertices.shape[0]
    edge_ids: dict[tuple[int, int], int] = {}
    tri_p2 = np.empty((mesh.triangles.shape[0], 6), dtype=np.int64)
    for t, (a, b, c) in enumerate(mesh.triangles):
        tri_p2[t, :3] = (a, b, c)
        for k, (p, q) in enumerate(((a, b), (b, c), (c, a))):
            key = (min(p, q), max(p, q))
            if key not in edge_ids:
                edge_ids[key] = len(edge_ids)
            tri_p2[t, 3 + k] = nv + edge_ids[key]

    mids = np.empty((len(edge_ids), 2))
    for (p, q), e in edge_ids.items():
        mids[e] = 0.5 * (mesh.vertices[p] + mesh.vertices[q])
    p2_coords = np.vstack([mesh.vertices, mids])
    n_p2 = p2_coords.shape[0]

    bverts = set(boundary_vertex_ids(mesh).tolist())
    bnodes = sorted(bverts | {
        nv + edge_ids[(min(a, b), max(a, b))] for a, b in mesh.boundary_edges
    })
    u_constrained = np.array(
        [2 * n + c for n in bnodes for c in (0, 1)], dtype=np.int64
    )
    u_mask = np.ones(2 * n_p2, dtype=bool)
    u_mask[u_constrained] = False
    u_free = np.nonzero(u_mask)[0]

    if mesh.layout is BcLayout.ALL_NEUMANN:
        constraint = PressureConstraint.ZERO_MEAN
        p_constrained = np.empty(0, dtype=np.int64)
    else:
        constraint = PressureConstraint.DIRICHLET_NODES
        p_constrained = dirichlet_vertex_ids(mesh)
    p_mask = np.ones(nv, dtype=bool)
    p_mask[p_constrained] = False
    p_free = np.nonzero(p_mask)[0]

    return Spaces(mesh=mesh, tri_p2=tri_p2, p2_coords=p2_coords,
                  n_u_dofs=2 * n_p2, n_p_dofs=nv,
                  u_constrained=u_constrained, u_free=u_free,
                  p_constrained=p_constrained, p_free=p_free,
                  pressure_constraint=constraint)


def mean_value(spaces: Spaces, field: Field) -> float:
    """Domain mean of a pressure-space function, by exact piecewise-linear quadrature."""
    if field.kind is not SpaceKind.PRESSURE:
        raise ValueError("mean_value is defined for pressure-space fields")
    areas = triangle_areas(spaces.mesh)
    vals = field.values[spaces.mesh.triangles]
    return float((areas / 3.0 * vals.sum(axis=1)).sum())


def zero_mean_project(spaces: Spaces, field: Field) -> Field:
    """Subtract the mean; the result integrates to zero (|Omega| = 1)."""
    return Field(field.kind, field.values - mean_value(spaces, field))


def interpolate(spaces: Spaces, kind: SpaceKind, fn: Callable, t: float | None = None) -> Field:
    """Nodal interpolation of a callable fn(x, y[, t]).

    Displacement callables return a length-2 sequence; boundary displacement
    entries are clamped to exact zero afterwards. Non-finite values are
    rejected.
    """
    if kind is SpaceKind.DISPLACEMENT:
        coords = spaces.p2_coords
        vals = np.empty(2 * coords.shape[0])
        for i, (x, y) in enumerate(coords):
            v = fn(x, y) if t is None else fn(x, y, t)
            vals[2 * i] = v[0]
            vals[2 * i + 1] = v[1]
        if not np.isfinite(vals).all():
            raise ValueError("interpolated displacement contains non-finite values")
        vals[spaces.u_constrained] = 0.0
    else:
        coords = spaces.mesh.vertices
        vals = np.empty(coords.shape[0])
        for i, (x, y) in enumerate(coords):
            vals[i] = fn(x, y) if t is None else fn(x, y, t)
        if not np.isfinite(vals).all():
            raise ValueError("interpolated pressure contains non-finite values")
    return Field(kind, vals)
