"""Bilinear-form assembly for the mixed displacement/pressure pair.

All forms are integrated with the degree-4 rule from elements.py, looping
elements in mesh order so repeated assembly of the same data is bit-identical.
Matrices are scipy CSR; loads are dense vectors over the full dof sets with
constrained entries zeroed.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .elements import QUAD_POINTS, QUAD_WEIGHTS, geometry, p1_basis, p2_basis, physical_quad_points
from .mesh import TriMesh, triangle_areas
from .spaces import Field, PressureConstraint, SpaceKind, Spaces


class PermeabilityLaw(Enum):
    CONSTANT = "constant"
    CARMAN_KOZENY = "carman_kozeny"
    QUADRATIC = "quadratic"


class IncompatibleSourceError(ValueError):
    """Fluid source with nonzero mean under the all-Neumann layout, strict mode."""


@dataclass(frozen=True)
class PermeabilityModel:
    """Dilation-to-permeability law, clamped to [k1, k2].

    The clamp realizes the two-sided admissibility bounds: whatever the raw
    law returns (including negative values for negative dilation arguments in
    the cubic law, and the blow-up at argument 1, which maps to k2), the
    evaluated permeability always lies in [k1, k2].

    law = CONSTANT        : raw(y) = k0
    law = CARMAN_KOZENY   : raw(y) = ck * y^3 / (1 - y)^2
    law = QUADRATIC       : raw(y) = a + b*y + c*y^2
    """

    law: PermeabilityLaw
    k1: float = 1e-3
    k2: float = 1e3
    k0: float = 1.0
    ck: float = 1.0
    a: float = 1.0
    b: float = 0.5
    c: float = 0.25

    def __post_init__(self):
        if not (np.isfinite(self.k1) and np.isfinite(self.k2)):
            raise ValueError("permeability bounds must be finite")
        if not (0.0 < self.k1 <= self.k2):
            raise ValueError(f"need 0 < k1 <= k2, got k1={self.k1}, k2={self.k2}")
        if self.law is PermeabilityLaw.CONSTANT and not self.k0 > 0.0:
            raise ValueError(f"constant law needs k0 > 0, got k0={self.k0}")
        if self.law is PermeabilityLaw.CARMAN_KOZENY and not self.ck > 0.0:
            raise ValueError(f"Carman-Kozeny law needs ck > 0, got ck={self.ck}")


def eval_permeability(model: PermeabilityModel, z: np.ndarray) -> np.ndarray:
    """Pointwise permeability for dilation values z, always inside [k1, k2]."""
    z = np.asarray(z, dtype=float)
    if not np.isfinite(z).all():
        raise ValueError("non-finite dilation value passed to permeability law")
    if model.law is PermeabilityLaw.CONSTANT:
        raw = np.full_like(z, model.k0)
    elif model.law is PermeabilityLaw.CARMAN_KOZENY:
        with np.errstate(divide="ignore"):
            raw = model.ck * z ** 3 / (1.0 - z) ** 2
        raw = np.where(z == 1.0, np.inf, raw)
    else:
        raw = model.a + model.b * z + model.c * z ** 2
    return np.clip(raw, model.k1, model.k2)


# ---------------------------------------------------------------------------
# quadrature-level tabulations, shared by every assembler


def _tabulate(mesh: TriMesh):
    p1v, p1g_ref = p1_basis(QUAD_POINTS)
    p2v, p2g_ref = p2_basis(QUAD_POINTS)
    _, inv_jac_t, area = geometry(mesh.vertices, mesh.triangles)
    # physical gradients: g[t, q, i, d]
    g1 = np.einsum("tde,qie->tqid", inv_jac_t, p1g_ref)
    g2 = np.einsum("tde,qie->tqid", inv_jac_t, p2g_ref)
    wdet = QUAD_WEIGHTS[None, :] * (2.0 * area)[:, None]
    return p1v, p2v, g1, g2, wdet


def _scatter(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return m.tocsr()


def _u_dof_table(spaces: Spaces) -> np.ndarray:
    """(nt, 12) global displacement dof per local (node, component) pair."""
    nodes = spaces.tri_p2
    dofs = np.empty((nodes.shape[0], 12), dtype=np.int64)
    dofs[:, 0::2] = 2 * nodes
    dofs[:, 1::2] = 2 * nodes + 1
    return dofs


def assemble_elasticity(spaces: Spaces, lam: float = 1.0, mu: float = 1.0) -> sp.csr_matrix:
    """Matrix of lam*(div u, div v) + 2*mu*(eps(u), eps(v)) on the full dof set."""
    _, _, _, g2, wdet = _tabulate(spaces.mesh)
    # T1[t, i, a, j, c] = sum_q w * dN_i/dx_a * dN_j/dx_c
    t1 = np.einsum("tq,tqia,tqjc->tiajc", wdet, g2, g2, optimize=True)
    # dot[t, i, j] = sum_q w * grad N_i . grad N_j
    dot = np.einsum("tq,tqid,tqjd->tij", wdet, g2, g2, optimize=True)
    nt = g2.shape[0]
    ke = np.zeros((nt, 12, 12))
    eye = np.eye(2)
    # rows (i, a), cols (j, c):
    #   lam * dN_i/dx_a dN_j/dx_c + mu * (delta_ac grad.grad + dN_i/dx_c dN_j/dx_a)
    for a in range(2):
        for c in range(2):
            block = lam * t1[:, :, a, :, c] + mu * t1[:, :, c, :, a]
            if a == c:
                block = block + mu * dot
            ke[:, a::2, c::2] = block
    dofs = _u_dof_table(spaces)
    rows = np.repeat(dofs, 12, axis=1)
    cols = np.tile(dofs, (1, 12))
    return _scatter(rows, cols, ke, (spaces.n_u_dofs, spaces.n_u_dofs))


def assemble_divergence_coupling(spaces: Spaces) -> sp.csr_matrix:
    """Matrix of (psi_r, div phi_j): pressure test rows, displacement columns."""
    p1v, _, _, g2, wdet = _tabulate(spaces.mesh)
    # gl[t, r, j, c] = sum_q w * psi_r(q) * dN_j/dx_c(q)
    gl = np.einsum("tq,qr,tqjc->trjc", wdet, p1v, g2, optimize=True)
    nt = gl.shape[0]
    ge = gl.reshape(nt, 3, 12)
    rows = np.repeat(spaces.tri_p2[:, :3], 12, axis=1)
    cols = np.tile(_u_dof_table(spaces), (1, 3))
    return _scatter(rows, cols, ge, (spaces.n_p_dofs, spaces.n_u_dofs))


def assemble_pressure_mass(spaces: Spaces) -> sp.csr_matrix:
    """Linear-pressure mass matrix; row sums against 1 reproduce |Omega| = 1."""
    p1v, _, _, _, wdet = _tabulate(spaces.mesh)
    me = np.einsum("tq,qr,qs->trs", wdet, p1v, p1v, optimize=True)
    tri = spaces.mesh.triangles
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    return _scatter(rows, cols, me, (spaces.n_p_dofs, spaces.n_p_dofs))


def assemble_diffusion(spaces: Spaces, k_at_qp: np.ndarray,
                       bounds: tuple[float, float] | None = None) -> sp.csr_matrix:
    """Matrix of (k grad p, grad q) with k given per triangle per quadrature point.

    k_at_qp : (nt, nq) permeability samples, already clamped by the law
    bounds : optional (k1, k2); samples outside them are rejected
    """
    _, _, g1, _, wdet = _tabulate(spaces.mesh)
    k = np.asarray(k_at_qp, dtype=float)
    if k.shape != wdet.shape:
        raise ValueError(f"k_at_qp has shape {k.shape}, expected {wdet.shape}")
    if not np.isfinite(k).all():
        raise ValueError("non-finite permeability sample")
    if bounds is not None:
        k1, k2 = bounds
        slack = 1e-12 * max(1.0, abs(k2))
        if k.min() < k1 - slack or k.max() > k2 + slack:
            raise ValueError(
                f"permeability samples outside [{k1}, {k2}]: "
                f"min={k.min()}, max={k.max()}")
    ae = np.einsum("tq,tq,tqrd,tqsd->trs", wdet, k, g1, g1, optimize=True)
    tri = spaces.mesh.triangles
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    return _scatter(rows, cols, ae, (spaces.n_p_dofs, spaces.n_p_dofs))


def permeability_at_quadrature(spaces: Spaces, model: PermeabilityModel,
                               z: np.ndarray) -> np.ndarray:
    """Evaluate the law on a nodal dilation field at every quadrature point."""
    p1v, _ = p1_basis(QUAD_POINTS)
    zq = np.einsum("qk,tk->tq", p1v, np.asarray(z)[spaces.mesh.triangles])
    return eval_permeability(model, zq)


def pressure_lumped_weights(spaces: Spaces) -> np.ndarray:
    """w_r = integral of the r-th linear basis function (partition of unity)."""
    areas = triangle_areas(spaces.mesh)
    w = np.zeros(spaces.n_p_dofs)
    np.add.at(w, spaces.mesh.triangles.ravel(),
              np.repeat(areas / 3.0, 3))
    return w


def assemble_loads(spaces: Spaces, F, S, t: float, *,
                   incompatible: str = "correct"):
    """Load vectors for body force F(x, y, t) -> (2,...) and fluid source S.

    Returns (f, s, warnings). Constrained displacement rows and Dirichlet
    pressure rows are zeroed. Under the zero-mean pressure constraint a
    fluid source with nonzero mean is inconsistent with the zero-flux
    boundary: incompatible="correct" subtracts the mean and records a
    warning, incompatible="strict" raises IncompatibleSourceError.
    """
    if incompatible not in ("correct", "strict"):
        raise ValueError(f"unknown incompatibility mode {incompatible!r}")
    mesh = spaces.mesh
    p1v, p2v, _, _, wdet = _tabulate(mesh)
    xq = physical_quad_points(mesh.vertices, mesh.triangles)
    warnings: list[dict] = []

    f = np.zeros(spaces.n_u_dofs)
    if F is not None:
        fv = np.asarray(F(xq[:, :, 0], xq[:, :, 1], t), dtype=float)  # (2, nt, nq)
        if not np.isfinite(fv).all():
            raise ValueError("body force produced non-finite values")
        # fe[t, j, c] = sum_q w * F_c(x_q) * N_j(q)
        fe = np.einsum("tq,ctq,qj->tjc", wdet, fv, p2v, optimize=True)
        np.add.at(f, _u_dof_table(spaces).ravel(),
                  fe.reshape(fe.shape[0], 12).ravel())
    f[spaces.u_constrained] = 0.0

    s = np.zeros(spaces.n_p_dofs)
    if S is not None:
        sv = np.asarray(S(xq[:, :, 0], xq[:, :, 1], t), dtype=float)  # (nt, nq)
        if not np.isfinite(sv).all():
            raise ValueError("fluid source produced non-finite values")
        se = np.einsum("tq,tq,qr->tr", wdet, sv, p1v, optimize=True)
        np.add.at(s, mesh.triangles.ravel(), se.ravel())
        if spaces.pressure_constraint is PressureConstraint.ZERO_MEAN:
            total = float(s.sum())  # equals the integral of S (partition of unity)
            scale = float(np.abs(s).sum()) + 1.0
            if abs(total) > 1e-12 * scale:
                if incompatible == "strict":
                    raise IncompatibleSourceError(
                        f"fluid source mean {total:.3e} at t={t} violates the "
                        "zero-flux compatibility condition")
                s = s - total * pressure_lumped_weights(spaces)
                warnings.append({"warning": "incompatible_source_mean_corrected",
                                 "t": t, "mean": total})
    s[spaces.p_constrained] = 0.0
    return f, s, warnings


def evaluate_dilation(spaces: Spaces, coupling: sp.csr_matrix, mass_solve,
                      u: np.ndarray) -> Field:
    """Project div(u) onto the pressure space: solve M zeta = G u.

    mass_solve : callable returning M^{-1} b (prefactorized)
    The result has zero mean to solver accuracy whenever u is clamped.
    """
    zeta = mass_solve(coupling @ u)
    return Field(SpaceKind.PRESSURE, zeta)
