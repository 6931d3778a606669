"""Implicit-Euler marches for the coupled system and the fixed-point loop
for dilation-dependent permeability.

One backward-Euler step solves the symmetric saddle system

    [ E        -a G^T          ] [u]   [ f            ]
    [ -a G     -(c0 M + dt A)  ] [p] = [ -(dt s + h)  ]

with history h = a G u_prev + c0 M p_prev (the first step consumes the
initial dilation datum through its mass pairing instead), and a scalar
zero-mean multiplier appended under the all-Neumann layout. The nonlinear
problem freezes the permeability argument z, solves the linear march, and
iterates z against the computed dilation until stationary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .assembly import (PermeabilityModel, assemble_diffusion, assemble_loads,
                       permeability_at_quadrature)
from .linalg import RefinedSolver
from .mesh import BcLayout, build_unit_square_mesh
from .operators import FormSuite, build_forms
from .registry import get_case
from .spaces import (Field, PressureConstraint, SpaceKind, Spaces, build_spaces,
                     interpolate, mean_value, zero_mean_project)


class PicardMode(Enum):
    GLOBAL = "global"
    PER_STEP = "per_step"


class ProblemDataError(ValueError):
    """Inconsistent problem data (time grid, layouts, initial dilation)."""


@dataclass
class BiotProblem:
    """Discrete problem bundle: spaces, assembled forms, law, data, time grid."""

    spaces: Spaces
    forms: FormSuite
    model: PermeabilityModel
    F: object
    S: object
    d0: np.ndarray
    d0_shift: float
    lam: float
    mu: float
    alpha: float
    c0: float
    dt: float
    T: float
    n_steps: int
    incompatible: str
    case_name: str


@dataclass
class Trajectory:
    """Computed states at t_1..t_N (the continuous problem carries no
    displacement or pressure initial datum, only the dilation d0, stored
    as metadata)."""

    times: np.ndarray          # (N,)
    u: np.ndarray              # (N, n_u)
    p: np.ndarray              # (N, n_p)
    zeta: np.ndarray           # (N, n_p)
    multiplier: np.ndarray     # (N,) zero-mean multiplier values (0 when unused)
    z_used: np.ndarray         # (N, n_p) permeability argument fields
    d0: np.ndarray             # (n_p,)
    dt: float
    warnings: list = field(default_factory=list)


@dataclass
class PicardReport:
    mode: PicardMode
    tol: float
    max_iter: int
    converged: bool
    iterations: int
    residuals: list
    per_step_iterations: list | None = None


def make_problem(n: int, layout: BcLayout, case, model: PermeabilityModel,
                 dt: float, T: float, *, lam: float = 1.0, mu: float = 1.0,
                 alpha: float = 1.0, c0: float = 0.0,
                 incompatible: str = "correct",
                 d0_override: np.ndarray | None = None) -> BiotProblem:
    """Build spaces, assemble the time-independent forms, validate the data."""
    if isinstance(case, str):
        case = get_case(case)
    if case.required_layout is not None and layout is not case.required_layout:
        raise ProblemDataError(
            f"case {case.name!r} manufactures boundary data for layout "
            f"{case.required_layout.value!r}, not {layout.value!r}")
    if not (lam > 0.0 and mu > 0.0 and alpha > 0.0 and c0 >= 0.0):
        raise ProblemDataError("need lam, mu, alpha > 0 and c0 >= 0")
    if not (dt > 0.0 and T > 0.0 and dt <= T):
        raise ProblemDataError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        raise ProblemDataError(f"T={T} is not an integer multiple of dt={dt}")

    mesh = build_unit_square_mesh(n, layout)
    spaces = build_spaces(mesh)
    forms = build_forms(spaces, lam, mu)

    if d0_override is not None:
        d0_field = Field(SpaceKind.PRESSURE, np.asarray(d0_override, dtype=float).copy())
    elif case.d0 is not None:
        d0_field = interpolate(spaces, SpaceKind.PRESSURE,
                               lambda x, y: case.d0(x, y))
    else:
        d0_field = Field(SpaceKind.PRESSURE, np.zeros(spaces.n_p_dofs))
    raw_mean = mean_value(spaces, d0_field)
    d0_field = zero_mean_project(spaces, d0_field)
    resid_mean = mean_value(spaces, d0_field)
    if abs(resid_mean) > 1e-10:
        raise ProblemDataError(f"initial dilation mean {resid_mean:.3e} after projection")

    return BiotProblem(spaces=spaces, forms=forms, model=model,
                       F=case.F, S=case.S, d0=d0_field.values, d0_shift=raw_mean,
                       lam=lam, mu=mu, alpha=alpha, c0=c0, dt=dt, T=T,
                       n_steps=n_steps, incompatible=incompatible,
                       case_name=case.name)


def _zero_mean_column(forms: FormSuite) -> np.ndarray:
    return forms.pressure_mass @ np.ones(forms.spaces.n_p_dofs)


def solve_linear_biot(problem: BiotProblem, z_steps: np.ndarray | None = None) -> Trajectory:
    """March the linear system with a frozen permeability argument.

    z_steps : (N, n_p) dilation fields, piecewise constant in time (step n
              uses row n); defaults to zero. Factorization is reused across
              steps whenever the permeability samples repeat bitwise.
    """
    spaces = problem.spaces
    forms = problem.forms
    n_p = spaces.n_p_dofs
    N = problem.n_steps
    dt = problem.dt
    if z_steps is None:
        z_steps = np.zeros((N, n_p))
    z_steps = np.asarray(z_steps, dtype=float)
    if z_steps.shape != (N, n_p):
        raise ProblemDataError(
            f"z_steps has shape {z_steps.shape}, expected {(N, n_p)}")

    zero_mean = spaces.pressure_constraint is PressureConstraint.ZERO_MEAN
    uf = spaces.u_free
    pf = spaces.p_free
    e_ff = forms.elasticity[uf][:, uf].tocsr()
    g_f = forms.coupling[pf][:, uf].tocsr()
    m_ff = forms.pressure_mass[pf][:, pf].tocsr()
    mcol = _zero_mean_column(forms) if zero_mean else None

    times = dt * np.arange(1, N + 1)
    out_u = np.zeros((N, spaces.n_u_dofs))
    out_p = np.zeros((N, n_p))
    out_zeta = np.zeros((N, n_p))
    out_gamma = np.zeros(N)
    warnings: list = []

    hist_full = problem.alpha * (forms.pressure_mass @ problem.d0)
    solver = None
    k_prev = None
    for nstep in range(N):
        t = times[nstep]
        k_tq = permeability_at_quadrature(spaces, problem.model, z_steps[nstep])
        if solver is None or k_prev is None or not np.array_equal(k_prev, k_tq):
            a_mat = assemble_diffusion(spaces, k_tq,
                                       bounds=(problem.model.k1, problem.model.k2))
            a_ff = a_mat[pf][:, pf].tocsr()
            lower = (problem.c0 * m_ff + dt * a_ff).tocsr()
            blocks = [[e_ff, -problem.alpha * g_f.T], [-problem.alpha * g_f, -lower]]
            if zero_mean:
                col = sp.csr_matrix(-mcol[:, None])
                blocks = [[e_ff, -problem.alpha * g_f.T, None],
                          [-problem.alpha * g_f, -lower, col],
                          [None, col.T, None]]
            saddle = sp.bmat(blocks, format="csr")
            solver = RefinedSolver(saddle)
            k_prev = k_tq
        f_load, s_load, w = assemble_loads(spaces, problem.F, problem.S, t,
                                           incompatible=problem.incompatible)
        warnings.extend(w)
        rhs = np.concatenate([
            f_load[uf],
            -(dt * s_load + hist_full)[pf],
            [0.0] if zero_mean else [],
        ])
        sol = solver.solve(rhs)
        nu = uf.size
        u_full = np.zeros(spaces.n_u_dofs)
        u_full[uf] = sol[:nu]
        p_full = np.zeros(n_p)
        p_full[pf] = sol[nu:nu + pf.size]
        gamma = float(sol[-1]) if zero_mean else 0.0

        zeta = forms.mass_solver.solve(forms.coupling @ u_full)
        out_u[nstep] = u_full
        out_p[nstep] = p_full
        out_zeta[nstep] = zeta
        out_gamma[nstep] = gamma
        hist_full = problem.alpha * (forms.coupling @ u_full) \
            + problem.c0 * (forms.pressure_mass @ p_full)

    return Trajectory(times=times, u=out_u, p=out_p, zeta=out_zeta,
                      multiplier=out_gamma, z_used=z_steps.copy(), d0=problem.d0,
                      dt=dt, warnings=warnings)


def fixed_point_map(problem: BiotProblem, z_steps: np.ndarray):
    """One application of the dilation fixed-point map: freeze z, march,
    return the computed dilation trace (and the trajectory it came from)."""
    traj = solve_linear_biot(problem, z_steps)
    return traj.zeta, traj


def l2l2_norm(problem: BiotProblem, fields: np.ndarray) -> float:
    """Bochner norm over the step grid: sqrt(sum dt * ||f^n||_{L2}^2)."""
    m = problem.forms.pressure_mass
    acc = sum(float(row @ (m @ row)) for row in fields)
    return float(np.sqrt(problem.dt * acc))


def picard_solve(problem: BiotProblem, mode: PicardMode = PicardMode.GLOBAL,
                 tol: float = 1e-8, max_iter: int = 50,
                 z0: np.ndarray | None = None):
    """Iterate the dilation fixed point to stationarity.

    GLOBAL freezes the whole-trajectory argument between sweeps; PER_STEP
    iterates within each time step before advancing. Non-convergence is not
    an exception: the best iterate is returned with converged=False in the
    report.
    """
    if mode is PicardMode.GLOBAL:
        return _picard_global(problem, tol, max_iter, z0)
    return _picard_per_step(problem, tol, max_iter, z0)


def _picard_global(problem, tol, max_iter, z0):
    n_p = problem.spaces.n_p_dofs
    z = np.zeros((problem.n_steps, n_p)) if z0 is None else np.asarray(z0, dtype=float).copy()
    residuals: list[float] = []
    traj = None
    converged = False
    iterations = 0
    for m in range(1, max_iter + 1):
        zeta, traj = fixed_point_map(problem, z)
        r = l2l2_norm(problem, zeta - z)
        residuals.append(r)
        iterations = m
        z = zeta
        if r <= tol * max(1.0, l2l2_norm(problem, zeta)):
            converged = True
            break
    report = PicardReport(mode=PicardMode.GLOBAL, tol=tol, max_iter=max_iter,
                          converged=converged, iterations=iterations,
                          residuals=residuals)
    return traj, report


def _picard_per_step(problem, tol, max_iter, z0):
    spaces = problem.spaces
    forms = problem.forms
    n_p = spaces.n_p_dofs
    N = problem.n_steps
    dt = problem.dt
    zero_mean = spaces.pressure_constraint is PressureConstraint.ZERO_MEAN
    uf = spaces.u_free
    pf = spaces.p_free
    e_ff = forms.elasticity[uf][:, uf].tocsr()
    g_f = forms.coupling[pf][:, uf].tocsr()
    m_ff = forms.pressure_mass[pf][:, pf].tocsr()
    mcol = _zero_mean_column(forms) if zero_mean else None
    m_p = forms.pressure_mass

    times = dt * np.arange(1, N + 1)
    out_u = np.zeros((N, spaces.n_u_dofs))
    out_p = np.zeros((N, n_p))
    out_zeta = np.zeros((N, n_p))
    out_gamma = np.zeros(N)
    z_used = np.zeros((N, n_p))
    warnings: list = []
    residuals: list[float] = []
    per_step_iters: list[int] = []
    all_converged = True

    hist_full = problem.alpha * (m_p @ problem.d0)
    z_guess = problem.d0.copy() if z0 is None else np.asarray(z0, dtype=float)[0].copy()
    for nstep in range(N):
        t = times[nstep]
        f_load, s_load, w = assemble_loads(spaces, problem.F, problem.S, t,
                                           incompatible=problem.incompatible)
        warnings.extend(w)
        step_converged = False
        for it in range(1, max_iter + 1):
            k_tq = permeability_at_quadrature(spaces, problem.model, z_guess)
            a_mat = assemble_diffusion(spaces, k_tq,
                                       bounds=(problem.model.k1, problem.model.k2))
            a_ff = a_mat[pf][:, pf].tocsr()
            lower = (problem.c0 * m_ff + dt * a_ff).tocsr()
            blocks = [[e_ff, -problem.alpha * g_f.T], [-problem.alpha * g_f, -lower]]
            if zero_mean:
                col = sp.csr_matrix(-mcol[:, None])
                blocks = [[e_ff, -problem.alpha * g_f.T, None],
                          [-problem.alpha * g_f, -lower, col],
                          [None, col.T, None]]
            saddle = sp.bmat(blocks, format="csr")
            rhs = np.concatenate([
                f_load[uf],
                -(dt * s_load + hist_full)[pf],
                [0.0] if zero_mean else [],
            ])
            sol = RefinedSolver(saddle).solve(rhs)
            u_full = np.zeros(spaces.n_u_dofs)
            u_full[uf] = sol[:uf.size]
            p_full = np.zeros(n_p)
            p_full[pf] = sol[uf.size:uf.size + pf.size]
            gamma = float(sol[-1]) if zero_mean else 0.0
            zeta = forms.mass_solver.solve(forms.coupling @ u_full)
            diff = zeta - z_guess
            r = float(np.sqrt(max(diff @ (m_p @ diff), 0.0)))
            residuals.append(r)
            z_guess = zeta
            if r <= tol * max(1.0, float(np.sqrt(max(zeta @ (m_p @ zeta), 0.0)))):
                step_converged = True
                per_step_iters.append(it)
                break
        if not step_converged:
            per_step_iters.append(max_iter)
            all_converged = False
        out_u[nstep] = u_full
        out_p[nstep] = p_full
        out_zeta[nstep] = zeta
        out_gamma[nstep] = gamma
        z_used[nstep] = z_guess
        hist_full = problem.alpha * (forms.coupling @ u_full) \
            + problem.c0 * (m_p @ p_full)

    traj = Trajectory(times=times, u=out_u, p=out_p, zeta=out_zeta,
                      multiplier=out_gamma, z_used=z_used, d0=problem.d0,
                      dt=dt, warnings=warnings)
    report = PicardReport(mode=PicardMode.PER_STEP, tol=tol, max_iter=max_iter,
                          converged=all_converged, iterations=len(residuals),
                          residuals=residuals, per_step_iterations=per_step_iters)
    return traj, report


def weak_form_residual(problem: BiotProblem, traj: Trajectory,
                       z_steps: np.ndarray | None = None) -> dict:
    """Relative residuals of the discrete weak form along a trajectory.

    By default the permeability is evaluated at the trajectory's own dilation
    (the nonlinear fixed-point sense); pass z_steps to check the linear march
    against the argument it was actually solved with.
    """
    spaces = problem.spaces
    forms = problem.forms
    dt = problem.dt
    zero_mean = spaces.pressure_constraint is PressureConstraint.ZERO_MEAN
    uf = spaces.u_free
    pf = spaces.p_free
    mcol = _zero_mean_column(forms) if zero_mean else None
    if z_steps is None:
        z_steps = traj.zeta

    hist_full = problem.alpha * (forms.pressure_mass @ problem.d0)
    max_u = 0.0
    max_p = 0.0
    for nstep, t in enumerate(traj.times):
        u = traj.u[nstep]
        p = traj.p[nstep]
        f_load, s_load, _ = assemble_loads(spaces, problem.F, problem.S, t,
                                           incompatible=problem.incompatible)
        k_tq = permeability_at_quadrature(spaces, problem.model, z_steps[nstep])
        a_mat = assemble_diffusion(spaces, k_tq,
                                   bounds=(problem.model.k1, problem.model.k2))
        term_e = (forms.elasticity @ u)[uf]
        term_g = problem.alpha * (forms.coupling.T @ p)[uf]
        ru = term_e - term_g - f_load[uf]
        su = np.linalg.norm(term_e) + np.linalg.norm(term_g) + np.linalg.norm(f_load[uf])
        max_u = max(max_u, float(np.linalg.norm(ru) / max(su, 1e-300)))

        term_gu = problem.alpha * (forms.coupling @ u)
        term_m = problem.c0 * (forms.pressure_mass @ p)
        term_a = dt * (a_mat @ p)
        lhs = term_gu + term_m + term_a
        if zero_mean:
            lhs = lhs + traj.multiplier[nstep] * mcol
        rhs = dt * s_load + hist_full
        rp = (lhs - rhs)[pf]
        scale = (np.linalg.norm(term_gu[pf]) + np.linalg.norm(term_m[pf])
                 + np.linalg.norm(term_a[pf]) + np.linalg.norm(rhs[pf]))
        max_p = max(max_p, float(np.linalg.norm(rp) / max(scale, 1e-300)))
        hist_full = problem.alpha * (forms.coupling @ u) \
            + problem.c0 * (forms.pressure_mass @ p)
    return {"displacement": max_u, "pressure": max_p, "max": max(max_u, max_p)}
