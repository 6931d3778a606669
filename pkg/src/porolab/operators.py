"""Operator machinery: clamped elasticity solve, the pressure-to-dilation map,
its dense realization and spectrum, dual norms, and the pressure-only march.

The pressure-to-dilation map sends a square-integrable pressure field to the
dilation of the displacement it drives through the clamped elasticity problem.
Its domain carries no boundary conditions (pressure tags enter the diffusion
form and the marches only), so the dense realization depends on the mesh alone;
constants span its kernel and its image has zero mean.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .assembly import (PermeabilityModel, assemble_diffusion, assemble_divergence_coupling,
                       assemble_elasticity, assemble_pressure_mass, evaluate_dilation,
                       permeability_at_quadrature)
from .linalg import RefinedSolver
from .spaces import Field, PressureConstraint, SpaceKind, Spaces

DENSE_PRESSURE_DOF_CAP = 2000


class DenseCapError(RuntimeError):
    """Dense realization request above the pressure-dof cap."""


class DualNormKind(Enum):
    ELASTIC_ENERGY = "elastic_energy"
    H1_PRESSURE = "h1_pressure"


@dataclass
class FormSuite:
    """Assembled forms shared by the operators and the marches."""

    spaces: Spaces
    lam: float
    mu: float
    elasticity: sp.csr_matrix      # full dof set
    coupling: sp.csr_matrix        # (pressure, displacement)
    pressure_mass: sp.csr_matrix
    elasticity_solver: RefinedSolver   # free-free block
    mass_solver: RefinedSolver


def build_forms(spaces: Spaces, lam: float = 1.0, mu: float = 1.0) -> FormSuite:
    e = assemble_elasticity(spaces, lam, mu)
    g = assemble_divergence_coupling(spaces)
    m = assemble_pressure_mass(spaces)
    free = spaces.u_free
    e_ff = e[free][:, free].tocsr()
    return FormSuite(spaces=spaces, lam=lam, mu=mu, elasticity=e, coupling=g,
                     pressure_mass=m,
                     elasticity_solver=RefinedSolver(e_ff),
                     mass_solver=RefinedSolver(m))


class ElasticitySolver:
    """Clamped elasticity inverse: load functional in, displacement out."""

    def __init__(self, forms: FormSuite):
        self.forms = forms

    def solve(self, load: np.ndarray) -> Field:
        spaces = self.forms.spaces
        u = np.zeros(spaces.n_u_dofs)
        u[spaces.u_free] = self.forms.elasticity_solver.solve(load[spaces.u_free])
        return Field(SpaceKind.DISPLACEMENT, u)


def solve_elasticity(forms: FormSuite, load: np.ndarray) -> Field:
    return ElasticitySolver(forms).solve(load)


def elastic_energy_norm(forms: FormSuite, u: np.ndarray) -> float:
    """The energy norm induced by the elasticity form (squared value >= 0)."""
    return float(np.sqrt(max(u @ (forms.elasticity @ u), 0.0)))


def pressure_to_dilation(forms: FormSuite, p: np.ndarray) -> Field:
    """Apply the pressure-to-dilation map to a nodal pressure field.

    Solves the clamped elasticity problem driven by the pressure gradient,
    then projects the divergence of that displacement back onto the pressure
    space. Constant inputs map to zero; outputs have zero mean.
    """
    spaces = forms.spaces
    rhs = (forms.coupling.T @ p)[spaces.u_free]
    u = np.zeros(spaces.n_u_dofs)
    u[spaces.u_free] = forms.elasticity_solver.solve(rhs)
    return evaluate_dilation(spaces, forms.coupling, forms.mass_solver.solve, u)


def dilation_pairing(forms: FormSuite, p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric pairing (map applied to p, q) in the pressure mass inner product.

    Equals (G^T q) . E^{-1} (G^T p): symmetric and positive semidefinite, a
    genuine inner product on zero-mean fields.
    """
    spaces = forms.spaces
    rp = (forms.coupling.T @ p)[spaces.u_free]
    rq = (forms.coupling.T @ q)[spaces.u_free]
    return float(rq @ forms.elasticity_solver.solve(rp))


@dataclass
class DenseDilationRealization:
    """Column-by-column dense realization of the pressure-to-dilation map.

    matrix : (n_p, n_p) the map itself (mass-inverted)
    weighted : (n_p, n_p) mass-weighted map, symmetric PSD up to solver error
    mass : (n_p, n_p) dense pressure mass
    """

    matrix: np.ndarray
    weighted: np.ndarray
    mass: np.ndarray
    layout: str
    n: int

    @property
    def symmetry_residual(self) -> float:
        w = self.weighted
        return float(np.linalg.norm(w - w.T) / max(np.linalg.norm(w), 1e-300))


def dense_dilation_matrix(forms: FormSuite,
                          cap: int = DENSE_PRESSURE_DOF_CAP) -> DenseDilationRealization:
    """Materialize the map by applying it to every pressure basis vector."""
    spaces = forms.spaces
    n_p = spaces.n_p_dofs
    if n_p > cap:
        raise DenseCapError(
            f"{n_p} pressure dofs exceed the dense cap {cap}; "
            "raise the cap explicitly to force a dense realization")
    bmat = np.empty((n_p, n_p))
    wmat = np.empty((n_p, n_p))
    basis = np.zeros(n_p)
    for j in range(n_p):
        basis[:] = 0.0
        basis[j] = 1.0
        rhs = (forms.coupling.T @ basis)[spaces.u_free]
        u = np.zeros(spaces.n_u_dofs)
        u[spaces.u_free] = forms.elasticity_solver.solve(rhs)
        w = forms.coupling @ u
        wmat[:, j] = w
        bmat[:, j] = forms.mass_solver.solve(w)
    return DenseDilationRealization(matrix=bmat, weighted=wmat,
                                    mass=forms.pressure_mass.toarray(),
                                    layout=spaces.mesh.layout.value,
                                    n=spaces.mesh.n)


@dataclass
class DilationSpectrum:
    """Generalized symmetric eigendecomposition of the dense realization."""

    eigenvalues: np.ndarray          # ascending
    eigenvectors: np.ndarray         # mass-orthonormal columns
    zero_tol: float = 1e-10

    @property
    def zero_multiplicity(self) -> int:
        return int((np.abs(self.eigenvalues) <= self.zero_tol).sum())

    @property
    def min_nonzero(self) -> float:
        nz = self.eigenvalues[np.abs(self.eigenvalues) > self.zero_tol]
        return float(nz.min()) if nz.size else float("nan")

    @property
    def max_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])


def dilation_spectrum(realization: DenseDilationRealization) -> DilationSpectrum:
    """Eigenpairs of the mass-weighted realization against the mass matrix.

    The weighted matrix is symmetrized (residual is separately reported and
    must sit at solver tolerance) before the generalized solve.
    """
    w = 0.5 * (realization.weighted + realization.weighted.T)
    vals, vecs = scipy.linalg.eigh(w, realization.mass)
    return DilationSpectrum(eigenvalues=vals, eigenvectors=vecs)


class DualNorm:
    """Riesz-representative dual norms against the chosen pivot form.

    ELASTIC_ENERGY : sqrt(f . E^{-1} f) on free displacement dofs
    H1_PRESSURE    : sqrt(f . K^{-1} f), K the unit-permeability diffusion
                     form on the constrained pressure space (a zero-mean
                     multiplier replaces node constraints in the all-Neumann
                     layout)
    """

    def __init__(self, forms: FormSuite):
        self.forms = forms
        spaces = forms.spaces
        k_unit = np.ones((spaces.mesh.triangles.shape[0], 6))
        stiff = assemble_diffusion(spaces, k_unit)
        if spaces.pressure_constraint is PressureConstraint.ZERO_MEAN:
            m_col = sp.csr_matrix((forms.pressure_mass @ np.ones(spaces.n_p_dofs))[:, None])
            aug = sp.bmat([[stiff, m_col], [m_col.T, None]], format="csr")
            self._pressure_solver = RefinedSolver(aug)
            self._augmented = True
        else:
            free = spaces.p_free
            self._pressure_solver = RefinedSolver(stiff[free][:, free].tocsr())
            self._augmented = False

    def value(self, load: np.ndarray, kind: DualNormKind) -> float:
        spaces = self.forms.spaces
        if kind is DualNormKind.ELASTIC_ENERGY:
            b = load[spaces.u_free]
            x = self.forms.elasticity_solver.solve(b)
            return float(np.sqrt(max(b @ x, 0.0)))
        if self._augmented:
            b = np.concatenate([load, [0.0]])
            x = self._pressure_solver.solve(b)
            return float(np.sqrt(max(load @ x[:-1], 0.0)))
        b = load[spaces.p_free]
        x = self._pressure_solver.solve(b)
        return float(np.sqrt(max(b @ x, 0.0)))


def dual_norm(forms: FormSuite, load: np.ndarray, kind: DualNormKind) -> float:
    return DualNorm(forms).value(load, kind)


def reduced_solve(forms: FormSuite, model: PermeabilityModel,
                  z_steps: np.ndarray, s_loads: np.ndarray,
                  d0_values: np.ndarray, dt: float,
                  realization: DenseDilationRealization | None = None) -> np.ndarray:
    """Implicit-Euler march of the pressure-only reformulation.

    Eliminates the displacement through the pressure-to-dilation map (valid
    for vanishing body force) and marches

        (weighted map + dt * diffusion(k(z^{n+1}))) p^{n+1} = history + dt * s^{n+1},

    where the history is the weighted map applied to p^n, and the first step
    consumes the initial dilation datum through its mass pairing. Returns the
    pressure iterates, one row per step.
    """
    spaces = forms.spaces
    if realization is None:
        realization = dense_dilation_matrix(forms)
    w = 0.5 * (realization.weighted + realization.weighted.T)
    m_dense = realization.mass
    n_steps = z_steps.shape[0]
    n_p = spaces.n_p_dofs
    zero_mean = spaces.pressure_constraint is PressureConstraint.ZERO_MEAN
    free = spaces.p_free

    pressures = np.zeros((n_steps, n_p))
    hist = m_dense @ d0_values
    for n in range(n_steps):
        k_tq = permeability_at_quadrature(spaces, model, z_steps[n])
        diff = assemble_diffusion(spaces, k_tq, bounds=(model.k1, model.k2)).toarray()
        sys = w + dt * diff
        rhs = hist + dt * s_loads[n]
        if zero_mean:
            m_col = m_dense @ np.ones(n_p)
            aug = np.zeros((n_p + 1, n_p + 1))
            aug[:n_p, :n_p] = sys
            aug[:n_p, n_p] = m_col
            aug[n_p, :n_p] = m_col
            sol = np.linalg.solve(aug, np.concatenate([rhs, [0.0]]))
            p = sol[:n_p]
        else:
            p = np.zeros(n_p)
            p[free] = np.linalg.solve(sys[np.ix_(free, free)], rhs[free])
        pressures[n] = p
        hist = w @ p
    return pressures
