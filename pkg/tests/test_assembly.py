"""Form assembly against frozen closed-form integrals and structural invariants.

The polynomial oracles below were integrated by hand and double-checked with a
computer algebra system before being frozen here:

    u* = (x^2, x*y), lam = mu = 1:
        integral of 2*mu*e(u*):e(u*) + lam*(div u*)^2 over the unit square
        = 20/3
    q* = 1 + 2x + 3y:
        integral of q* * div u*  = 23/4
        integral of q*^2         = 40/3

P2 interpolation reproduces quadratics exactly and the 6-point rule integrates
degree-4 polynomials exactly, so assembly must hit these values to rounding.
"""
import numpy as np
import pytest
import scipy.sparse.linalg as spla

from porolab.assembly import (IncompatibleSourceError, PermeabilityLaw, PermeabilityModel,
                              assemble_diffusion, assemble_divergence_coupling,
                              assemble_elasticity, assemble_loads, assemble_pressure_mass,
                              eval_permeability, evaluate_dilation,
                              permeability_at_quadrature)
from porolab.linalg import RefinedSolver
from porolab.mesh import BcLayout, build_unit_square_mesh
from porolab.spaces import SpaceKind, build_spaces

ELASTIC_ENERGY_ORACLE = 20.0 / 3.0
COUPLING_ORACLE = 23.0 / 4.0
MASS_ORACLE = 40.0 / 3.0


def _spaces(n=3, layout=BcLayout.ALL_DIRICHLET):
    return build_spaces(build_unit_square_mesh(n, layout))


def _raw_displacement(spaces, f1, f2):
    """Interleaved nodal displacement vector without boundary clamping."""
    xs, ys = spaces.p2_coords.T
    vals = np.empty(spaces.n_u_dofs)
    vals[0::2] = f1(xs, ys)
    vals[1::2] = f2(xs, ys)
    return vals


def test_elastic_energy_polynomial_oracle():
    spaces = _spaces(3)
    e_mat = assemble_elasticity(spaces, lam=1.0, mu=1.0)
    u = _raw_displacement(spaces, lambda x, y: x**2, lambda x, y: x * y)
    np.testing.assert_allclose(u @ (e_mat @ u), ELASTIC_ENERGY_ORACLE, rtol=1e-13)


def test_elasticity_symmetric_and_psd():
    spaces = _spaces(2)
    e_mat = assemble_elasticity(spaces, lam=2.0, mu=0.7).toarray()
    np.testing.assert_allclose(e_mat, e_mat.T, atol=1e-14)
    eigs = np.linalg.eigvalsh(e_mat)
    # rigid modes live in the kernel before boundary conditions; nothing negative
    assert eigs.min() > -1e-12 * abs(eigs).max()


def test_lame_parameters_scale_linearly():
    spaces = _spaces(2)
    base_lam = assemble_elasticity(spaces, lam=1.0, mu=0.0).toarray()
    base_mu = assemble_elasticity(spaces, lam=0.0, mu=1.0).toarray()
    combo = assemble_elasticity(spaces, lam=1.3, mu=2.1).toarray()
    np.testing.assert_allclose(combo, 1.3 * base_lam + 2.1 * base_mu, atol=1e-12)


def test_coupling_polynomial_oracle():
    spaces = _spaces(3)
    g_mat = assemble_divergence_coupling(spaces)
    u = _raw_displacement(spaces, lambda x, y: x**2, lambda x, y: x * y)
    xv, yv = spaces.mesh.vertices.T
    q = 1.0 + 2.0 * xv + 3.0 * yv
    np.testing.assert_allclose(q @ (g_mat @ u), COUPLING_ORACLE, rtol=1e-13)


def test_mass_polynomial_oracle_and_partition_of_unity():
    spaces = _spaces(3)
    m_mat = assemble_pressure_mass(spaces)
    xv, yv = spaces.mesh.vertices.T
    q = 1.0 + 2.0 * xv + 3.0 * yv
    np.testing.assert_allclose(q @ (m_mat @ q), MASS_ORACLE, rtol=1e-13)
    ones = np.ones(spaces.n_p_dofs)
    np.testing.assert_allclose(ones @ (m_mat @ ones), 1.0, rtol=1e-13)


def test_diffusion_unit_k_matches_kernel_and_symmetry():
    spaces = _spaces(3)
    n_tri = spaces.mesh.triangles.shape[0]
    k_tq = np.ones((n_tri, 6))
    a_mat = assemble_diffusion(spaces, k_tq)
    diff = a_mat - a_mat.T
    assert abs(diff).max() < 1e-14
    # constants are in the kernel of the stiffness form
    assert np.abs(a_mat @ np.ones(spaces.n_p_dofs)).max() < 1e-13
    # Dirichlet energy of q = x is 1
    xv = spaces.mesh.vertices[:, 0]
    np.testing.assert_allclose(xv @ (a_mat @ xv), 1.0, rtol=1e-13)


def test_diffusion_bounds_guard():
    spaces = _spaces(2)
    n_tri = spaces.mesh.triangles.shape[0]
    k_tq = np.full((n_tri, 6), 0.5)
    assemble_diffusion(spaces, k_tq, bounds=(0.1, 1.0))
    with pytest.raises(ValueError):
        assemble_diffusion(spaces, k_tq, bounds=(0.6, 1.0))
    with pytest.raises(ValueError):
        assemble_diffusion(spaces, k_tq, bounds=(0.1, 0.4))


def test_permeability_laws_respect_clamps():
    rng = np.random.default_rng(8121)
    y = rng.uniform(-5.0, 5.0, size=1_000_000)
    models = [
        PermeabilityModel(PermeabilityLaw.CONSTANT, k0=0.7, k1=1e-4, k2=10.0),
        PermeabilityModel(PermeabilityLaw.CARMAN_KOZENY, ck=1.0, k1=1e-4, k2=10.0),
        PermeabilityModel(PermeabilityLaw.QUADRATIC, a=0.5, b=1.0, c=2.0, k1=1e-4, k2=10.0),
    ]
    for model in models:
        k = eval_permeability(model, y)
        assert np.isfinite(k).all()
        assert k.min() >= model.k1 - 1e-15
        assert k.max() <= model.k2 + 1e-15


def test_carman_kozeny_formula_inside_clamps():
    model = PermeabilityModel(PermeabilityLaw.CARMAN_KOZENY, ck=2.0, k1=1e-6, k2=1e3)
    y = np.array([0.1, 0.3, 0.5])
    expected = 2.0 * y**3 / (1.0 - y) ** 2
    np.testing.assert_allclose(eval_permeability(model, y), expected, rtol=1e-14)
    # porosity 1 hits the pole and lands on the upper clamp, negatives on the lower
    assert eval_permeability(model, np.array([1.0]))[0] == model.k2
    assert eval_permeability(model, np.array([-0.2]))[0] == model.k1


def test_quadrature_permeability_matches_nodal_values():
    spaces = _spaces(3)
    model = PermeabilityModel(PermeabilityLaw.QUADRATIC, a=1.0, b=0.5, c=0.25,
                              k1=1e-6, k2=1e3)
    xv, yv = spaces.mesh.vertices.T
    z = 0.3 * xv - 0.1 * yv
    k_tq = permeability_at_quadrature(spaces, model, z)
    assert k_tq.shape == (spaces.mesh.triangles.shape[0], 6)
    # P1 interpolation commutes: k evaluated at interpolated z at quad points
    from porolab.elements import physical_quad_points
    xq = physical_quad_points(spaces.mesh.vertices, spaces.mesh.triangles)
    zq = 0.3 * xq[:, :, 0] - 0.1 * xq[:, :, 1]
    np.testing.assert_allclose(k_tq, eval_permeability(model, zq), rtol=1e-13)


def test_constant_body_force_load_closed_form():
    n = 3
    spaces = _spaces(n)
    f_load, s_load, warnings = assemble_loads(
        spaces, lambda x, y, t: np.stack([np.ones_like(x), np.zeros_like(x)]),
        None, 0.0)
    # Constrained rows are zeroed, so the x-sum is 1 minus the boundary basis
    # integrals. P2 vertex functions integrate to zero; each of the 4n boundary
    # edge midpoints contributes area/3 from its single triangle:
    # 1 - 4n * (1/(2 n^2))/3 = 1 - 2/(3n).
    np.testing.assert_allclose(f_load[0::2].sum(), 1.0 - 2.0 / (3.0 * n), rtol=1e-13)
    np.testing.assert_allclose(f_load[1::2].sum(), 0.0, atol=1e-14)
    assert np.all(f_load[spaces.u_constrained] == 0.0)
    assert s_load.shape == (spaces.n_p_dofs,)
    assert not warnings


def test_fluid_source_load_closed_form():
    # mean-free polynomial source on the unconstrained zero-mean space:
    # pairing with q = x gives integral of x*(x - 1/2) = 1/12 exactly
    spaces = _spaces(3, BcLayout.ALL_NEUMANN)
    _, s_load, warnings = assemble_loads(spaces, None,
                                         lambda x, y, t: x - 0.5, 0.0,
                                         incompatible="strict")
    xv = spaces.mesh.vertices[:, 0]
    np.testing.assert_allclose(xv @ s_load, 1.0 / 12.0, rtol=1e-13)
    assert not warnings


def test_source_compatibility_policies_on_zero_mean_space():
    spaces = _spaces(3, BcLayout.ALL_NEUMANN)
    biased = lambda x, y, t: np.ones_like(x)
    with pytest.raises(IncompatibleSourceError):
        assemble_loads(spaces, None, biased, 0.0, incompatible="strict")
    _, s_load, warnings = assemble_loads(spaces, None, biased, 0.0,
                                         incompatible="correct")
    assert warnings
    # corrected load is orthogonal to constants
    assert abs(s_load.sum()) < 1e-13


def test_evaluate_dilation_of_polynomial_displacement():
    spaces = _spaces(4)
    g_mat = assemble_divergence_coupling(spaces)
    m_mat = assemble_pressure_mass(spaces)
    solver = RefinedSolver(m_mat)
    u = _raw_displacement(spaces, lambda x, y: 0.5 * x**2, lambda x, y: 0.5 * y**2)
    zeta = evaluate_dilation(spaces, g_mat, solver.solve, u)
    xv, yv = spaces.mesh.vertices.T
    # div u = x + y lies in the P1 space, so its L2 projection is itself
    np.testing.assert_allclose(zeta.values, xv + yv, atol=1e-11)


def test_permeability_model_validation():
    with pytest.raises(ValueError):
        PermeabilityModel(PermeabilityLaw.CONSTANT, k0=1.0, k1=1.0, k2=0.5)
    with pytest.raises(ValueError):
        PermeabilityModel(PermeabilityLaw.CONSTANT, k0=-1.0)
    with pytest.raises(ValueError):
        PermeabilityModel(PermeabilityLaw.CARMAN_KOZENY, ck=-2.0)
