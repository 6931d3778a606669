"""Elasticity solve, pressure-to-dilation map, spectrum, dual norms, reduced march."""
import numpy as np
import pytest

from porolab.assembly import PermeabilityLaw, PermeabilityModel, assemble_loads
from porolab.mesh import BcLayout, build_unit_square_mesh
from porolab.operators import (DenseCapError, DualNormKind, build_forms,
                               dense_dilation_matrix, dilation_pairing,
                               dilation_spectrum, dual_norm, elastic_energy_norm,
                               pressure_to_dilation, reduced_solve, solve_elasticity)
from porolab.registry import get_case
from porolab.solver import make_problem, solve_linear_biot
from porolab.spaces import build_spaces

LAYOUTS = [BcLayout.ALL_DIRICHLET, BcLayout.ALL_NEUMANN, BcLayout.MIXED_LEFT_DIRICHLET]


def _forms(n=4, layout=BcLayout.ALL_DIRICHLET, lam=1.0, mu=1.0):
    return build_forms(build_spaces(build_unit_square_mesh(n, layout)), lam, mu)


def test_elasticity_solve_residual_and_clamping():
    rng = np.random.default_rng(411)
    forms = _forms(4)
    spaces = forms.spaces
    load = np.zeros(spaces.n_u_dofs)
    load[spaces.u_free] = rng.standard_normal(len(spaces.u_free))
    u = solve_elasticity(forms, load)
    assert np.all(u.values[spaces.u_constrained] == 0.0)
    residual = (forms.elasticity @ u.values - load)[spaces.u_free]
    assert np.linalg.norm(residual) < 1e-11 * max(1.0, np.linalg.norm(load))


def test_elastic_energy_norm_is_quadratic_form():
    rng = np.random.default_rng(412)
    forms = _forms(3)
    spaces = forms.spaces
    u = np.zeros(spaces.n_u_dofs)
    u[spaces.u_free] = rng.standard_normal(len(spaces.u_free))
    np.testing.assert_allclose(elastic_energy_norm(forms, u) ** 2,
                               u @ (forms.elasticity @ u), rtol=1e-12)


def test_elasticity_stability_estimate():
    # the solve is bounded by the dual norm of the load: |u|_E = |f|_E'
    rng = np.random.default_rng(413)
    forms = _forms(4)
    spaces = forms.spaces
    for _ in range(5):
        load = np.zeros(spaces.n_u_dofs)
        load[spaces.u_free] = rng.standard_normal(len(spaces.u_free))
        u = solve_elasticity(forms, load)
        lhs = elastic_energy_norm(forms, u.values)
        rhs = dual_norm(forms, load, DualNormKind.ELASTIC_ENERGY)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_dilation_map_annihilates_constants():
    for layout in LAYOUTS:
        forms = _forms(4, layout)
        ones = np.ones(forms.spaces.n_p_dofs)
        image = pressure_to_dilation(forms, ones)
        assert np.abs(image.values).max() < 1e-12


def test_dilation_pairing_symmetric_and_monotone():
    rng = np.random.default_rng(414)
    forms = _forms(4)
    n_p = forms.spaces.n_p_dofs
    for _ in range(10):
        p, q = rng.standard_normal((2, n_p))
        np.testing.assert_allclose(dilation_pairing(forms, p, q),
                                   dilation_pairing(forms, q, p), rtol=1e-10,
                                   atol=1e-13)
        assert dilation_pairing(forms, p, p) >= -1e-13


def test_dense_realization_matches_operator_action():
    rng = np.random.default_rng(415)
    forms = _forms(3)
    real = dense_dilation_matrix(forms)
    assert real.symmetry_residual < 1e-12
    p = rng.standard_normal(forms.spaces.n_p_dofs)
    np.testing.assert_allclose(real.matrix @ p,
                               pressure_to_dilation(forms, p).values,
                               atol=1e-11)


def test_spectrum_kernel_and_bounds():
    for layout in LAYOUTS:
        forms = _forms(4, layout)
        spec = dilation_spectrum(dense_dilation_matrix(forms))
        assert spec.zero_multiplicity == 1
        assert spec.eigenvalues.min() > -1e-11
        # operator norm is capped by 1/(lam + 2 mu) = 1/3 for lam = mu = 1
        assert spec.max_eigenvalue < 1.0 / 3.0 + 1e-12
        assert spec.max_eigenvalue > 0.25


def test_spectrum_is_layout_independent():
    spectra = []
    for layout in LAYOUTS:
        forms = _forms(4, layout)
        spectra.append(dilation_spectrum(dense_dilation_matrix(forms)).eigenvalues)
    np.testing.assert_allclose(spectra[1], spectra[0], atol=1e-10)
    np.testing.assert_allclose(spectra[2], spectra[0], atol=1e-10)


def test_min_nonzero_eigenvalue_stable_under_refinement():
    vals = []
    for n in (4, 8):
        forms = _forms(n, BcLayout.ALL_NEUMANN)
        vals.append(dilation_spectrum(dense_dilation_matrix(forms)).min_nonzero)
    drift = abs(vals[1] - vals[0]) / vals[0]
    assert drift < 0.25


def test_dense_cap_guard():
    forms = _forms(50)
    with pytest.raises(DenseCapError):
        dense_dilation_matrix(forms)


def test_dual_norm_riesz_identity():
    rng = np.random.default_rng(416)
    for layout, kind in [(BcLayout.ALL_DIRICHLET, DualNormKind.H1_PRESSURE),
                         (BcLayout.MIXED_LEFT_DIRICHLET, DualNormKind.H1_PRESSURE)]:
        forms = _forms(4, layout)
        spaces = forms.spaces
        w = np.zeros(spaces.n_p_dofs)
        w[spaces.p_free] = rng.standard_normal(len(spaces.p_free))
        k_tq = np.ones((spaces.mesh.triangles.shape[0], 6))
        from porolab.assembly import assemble_diffusion
        stiff = assemble_diffusion(spaces, k_tq)
        load = np.asarray(stiff @ w)
        # the Riesz representative of K w is w itself, so the dual norm is |w|_K
        np.testing.assert_allclose(dual_norm(forms, load, kind),
                                   np.sqrt(load @ w), rtol=1e-9)


def test_neumann_dual_norm_ignores_constant_component():
    rng = np.random.default_rng(417)
    forms = _forms(4, BcLayout.ALL_NEUMANN)
    spaces = forms.spaces
    load = rng.standard_normal(spaces.n_p_dofs)
    weights = np.asarray(forms.pressure_mass @ np.ones(spaces.n_p_dofs))
    base = dual_norm(forms, load, DualNormKind.H1_PRESSURE)
    shifted = dual_norm(forms, load + 3.7 * weights, DualNormKind.H1_PRESSURE)
    np.testing.assert_allclose(shifted, base, rtol=1e-9)


@pytest.mark.parametrize("layout", LAYOUTS)
def test_reduced_march_matches_monolithic(layout):
    # without body force the pressure march closes on its own; both routes
    # must produce the same pressure trajectory
    model = PermeabilityModel(PermeabilityLaw.CONSTANT, k0=1.0)
    problem = make_problem(6, layout, "source_only", model, 0.05, 0.25)
    traj = solve_linear_biot(problem)

    forms = problem.forms
    spaces = problem.spaces
    s_loads = np.stack([assemble_loads(spaces, None, problem.S, t)[1]
                        for t in traj.times])
    z_steps = np.zeros((len(traj.times), spaces.n_p_dofs))
    p_red = reduced_solve(forms, model, z_steps, s_loads, problem.d0, problem.dt)
    scale = max(np.abs(traj.p).max(), 1.0)
    assert np.abs(p_red - traj.p).max() / scale < 1e-10
