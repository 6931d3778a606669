"""Legacy ASCII VTK snapshots of one trajectory step.

Unstructured triangle grid; displacement as a three-component vector with a
zero third component, pressure, dilation, and evaluated permeability as
scalars at the vertices. Floats carry 17 significant digits so repeated runs
are byte-identical.
"""
from __future__ import annotations

import numpy as np

from .assembly import PermeabilityModel, eval_permeability
from .mesh import TriMesh


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def write_vtk_snapshot(path, mesh: TriMesh, u: np.ndarray, p: np.ndarray,
                       zeta: np.ndarray, model: PermeabilityModel,
                       title: str) -> None:
    """Write one snapshot; u is the full displacement vector (vertex values
    are its first 2*nv entries), p and zeta are vertex fields."""
    nv = mesh.vertices.shape[0]
    nt = mesh.triangles.shape[0]
    perm = eval_permeability(model, zeta)
    lines = []
    lines.append("# vtk DataFile Version 3.0")
    lines.append(title[:255])
    lines.append("ASCII")
    lines.append("DATASET UNSTRUCTURED_GRID")
    lines.append(f"POINTS {nv} double")
    for x, y in mesh.vertices:
        lines.append(f"{_fmt(x)} {_fmt(y)} 0")
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    lines.append(f"POINT_DATA {nv}")
    lines.append("VECTORS u double")
    for i in range(nv):
        lines.append(f"{_fmt(u[2 * i])} {_fmt(u[2 * i + 1])} 0")
    for name, vals in (("p", p), ("zeta", zeta), ("perm", perm)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        for v in vals:
            lines.append(_fmt(v))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
