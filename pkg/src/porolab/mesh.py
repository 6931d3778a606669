"""Structured triangulations of the unit square with tagged pressure boundary.

The displacement is clamped on the whole boundary in every layout; the tags
below only steer the pressure condition (p = 0 on Dirichlet edges, zero
normal flux elsewhere).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class BcLayout(Enum):
    """Pressure boundary layout on the unit square."""

    ALL_DIRICHLET = "dirichlet"
    ALL_NEUMANN = "neumann"
    MIXED_LEFT_DIRICHLET = "mixed_left"


class EdgeTag(Enum):
    PRESSURE_DIRICHLET = 1
    PRESSURE_NEUMANN = 2


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangle mesh of the unit square.

    vertices : (nv, 2) float64 coordinates
    triangles : (nt, 3) int vertex indices, counterclockwise
    boundary_edges : (nb, 2) int vertex index pairs, one owning triangle each
    edge_tags : (nb,) EdgeTag values aligned with boundary_edges
    layout : BcLayout the tags were generated from
    n : cells per side
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    layout: BcLayout
    n: int


def build_unit_square_mesh(n: int, layout: BcLayout = BcLayout.ALL_DIRICHLET) -> TriMesh:
    """Triangulate [0,1]^2 with n cells per side, two triangles per cell.

    Vertices are numbered row-major, vertex (i, j) -> i*(n+1)+j with
    x = i/n, y = j/n. Each cell is split along the diagonal from its
    lower-left to upper-right corner, so every triangle is counterclockwise
    with area 1/(2 n^2).
    """
    if n < 1:
        raise ValueError(f"need at least one cell per side, got n={n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i: int, j: int) -> int:
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    triangles = np.array(tris, dtype=np.int64)

    edges = []
    tags = []
    for i in range(n):
        edges.append((vid(i, 0), vid(i + 1, 0)))        # bottom, y = 0
        edges.append((vid(i, n), vid(i + 1, n)))        # top, y = 1
        edges.append((vid(0, i), vid(0, i + 1)))        # left, x = 0
        edges.append((vid(n, i), vid(n, i + 1)))        # right, x = 1
    boundary_edges = np.array(edges, dtype=np.int64)

    for (a, b) in boundary_edges:
        if layout is BcLayout.ALL_DIRICHLET:
            tags.append(EdgeTag.PRESSURE_DIRICHLET)
        elif layout is BcLayout.ALL_NEUMANN:
            tags.append(EdgeTag.PRESSURE_NEUMANN)
        else:
            on_left = vertices[a, 0] == 0.0 and vertices[b, 0] == 0.0
            tags.append(EdgeTag.PRESSURE_DIRICHLET if on_left else EdgeTag.PRESSURE_NEUMANN)
    edge_tags = np.array(tags, dtype=object)

    return TriMesh(vertices=vertices, triangles=triangles,
                   boundary_edges=boundary_edges, edge_tags=edge_tags,
                   layout=layout, n=n)


def triangle_areas(mesh: TriMesh) -> np.ndarray:
    """Signed areas, positive for counterclockwise orientation."""
    p = mesh.vertices[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def mesh_stats(mesh: TriMesh) -> dict:
    """Longest edge and total area (the area must reproduce |Omega| = 1)."""
    p = mesh.vertices[mesh.triangles]
    e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
    h_max = float(np.sqrt((e ** 2).sum(axis=2)).max())
    return {"h_max": h_max, "total_area": float(triangle_areas(mesh).sum()),
            "num_vertices": mesh.vertices.shape[0],
            "num_triangles": mesh.triangles.shape[0],
            "num_boundary_edges": mesh.boundary_edges.shape[0]}


def boundary_vertex_ids(mesh: TriMesh) -> np.ndarray:
    """All vertex ids lying on the boundary, sorted."""
    return np.unique(mesh.boundary_edges.ravel())


def dirichlet_vertex_ids(mesh: TriMesh) -> np.ndarray:
    """Pressure-constrained vertices: every endpoint of a Dirichlet edge.

    A vertex shared by a Dirichlet and a Neumann edge is constrained (the
    trace condition wins at junctions).
    """
    mask = np.array([tag is EdgeTag.PRESSURE_DIRICHLET for tag in mesh.edge_tags])
    if not mask.any():
        return np.empty(0, dtype=np.int64)
    return np.unique(mesh.boundary_edges[mask].ravel())
