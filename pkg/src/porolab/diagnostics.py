"""Verification instruments: the discrete energy audit, manufactured-solution
convergence studies, operator spectrum audits, and the dual-route
monolithic/pressure-only comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .assembly import (PermeabilityModel, PermeabilityLaw, _tabulate, assemble_diffusion,
                       assemble_loads, permeability_at_quadrature)
from .elements import physical_quad_points
from .linalg import RefinedSolver
from .mesh import BcLayout, build_unit_square_mesh, mesh_stats
from .operators import (DualNorm, DualNormKind, build_forms, dense_dilation_matrix,
                        dilation_spectrum, reduced_solve)
from .registry import Z_FIELDS, get_case
from .solver import BiotProblem, Trajectory, make_problem, solve_linear_biot
from .spaces import SpaceKind, Spaces, build_spaces, interpolate


class DtRule(Enum):
    DT_PROPORTIONAL_H2 = "h2"       # dt shrinks with h^2, matching the scheme orders
    DT_FIXED_TINY = "fixed_tiny"    # one small dt across levels (spatial error only)


# ---------------------------------------------------------------------------
# energy audit


@dataclass
class EnergyLedger:
    """Per-step bookkeeping of the discrete energy inequality.

    The untracked initial displacement is substituted by the discrete
    first-step elastic energy plus the mass-norm of the initial dilation
    datum; bound_label records that choice. The certified inequality is
    lhs(T) <= rhs(T) * (1 + tol).
    """

    steps: np.ndarray
    times: np.ndarray
    u_energy: np.ndarray          # squared elastic energy per step
    dissipation_cum: np.ndarray   # cumulative dt-weighted Darcy dissipation
    lhs: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray
    data_terms: dict
    flag: bool
    bound_label: str
    tol: float = 1e-9


def energy_audit(problem: BiotProblem, traj: Trajectory) -> EnergyLedger:
    """Audit the dissipation estimate along a computed trajectory.

    Left side: squared elastic energy at each step plus twice the cumulative
    permeability-weighted dissipation. Right side: the data functional

        2*(||F(0)||^2 + 2||F(t)||^2 + 2*(||u^1||_E^2 + ||d0||_M^2)
           + (1/k1) sum dt ||S||^2 + sum dt ||dF/dt||^2) * exp(2t),

    with dual norms realized through the elastic and unit-diffusion Riesz
    maps and the time derivative of F taken as backward difference quotients
    of the assembled loads.
    """
    forms = problem.forms
    dual = DualNorm(forms)
    N = problem.n_steps
    dt = problem.dt
    k1 = problem.model.k1

    f_prev, _, _ = assemble_loads(problem.spaces, problem.F, problem.S, 0.0,
                                  incompatible="correct")
    f0_sq = dual.value(f_prev, DualNormKind.ELASTIC_ENERGY) ** 2

    u_energy = np.zeros(N)
    diss_cum = np.zeros(N)
    lhs = np.zeros(N)
    rhs = np.zeros(N)
    s_sum = 0.0
    df_sum = 0.0
    diss = 0.0
    d0_sq = float(problem.d0 @ (forms.pressure_mass @ problem.d0))
    u1_sq = float(traj.u[0] @ (forms.elasticity @ traj.u[0]))

    for n in range(N):
        t = traj.times[n]
        f_n, s_n, _ = assemble_loads(problem.spaces, problem.F, problem.S, t,
                                     incompatible=problem.incompatible)
        s_sum += dt * dual.value(s_n, DualNormKind.H1_PRESSURE) ** 2
        df_sum += dt * dual.value((f_n - f_prev) / dt, DualNormKind.ELASTIC_ENERGY) ** 2
        f_prev = f_n

        k_tq = permeability_at_quadrature(problem.spaces, problem.model, traj.z_used[n])
        a_mat = assemble_diffusion(problem.spaces, k_tq,
                                   bounds=(problem.model.k1, problem.model.k2))
        diss += dt * float(traj.p[n] @ (a_mat @ traj.p[n]))
        diss_cum[n] = diss
        u_energy[n] = float(traj.u[n] @ (forms.elasticity @ traj.u[n]))

        ft_sq = dual.value(f_n, DualNormKind.ELASTIC_ENERGY) ** 2
        lhs[n] = u_energy[n] + 2.0 * diss
        rhs[n] = 2.0 * (f0_sq + 2.0 * ft_sq + 2.0 * (u1_sq + d0_sq)
                        + s_sum / k1 + df_sum) * np.exp(2.0 * t)

    margin = rhs - lhs
    flag = bool(lhs[-1] <= rhs[-1] * (1.0 + 1e-9))
    return EnergyLedger(
        steps=np.arange(1, N + 1), times=traj.times.copy(),
        u_energy=u_energy, dissipation_cum=diss_cum, lhs=lhs, rhs=rhs,
        margin=margin,
        data_terms={"f0_sq": f0_sq, "u1_sq": u1_sq, "d0_sq": d0_sq,
                    "s_dual_sum": s_sum, "df_dual_sum": df_sum, "k1": k1},
        flag=flag,
        bound_label=("initial displacement replaced by discrete first-step "
                     "elastic energy plus initial-dilation mass norm"))


# ---------------------------------------------------------------------------
# manufactured-solution studies


def _solution_errors(problem: BiotProblem, traj: Trajectory, exact) -> dict:
    """Quadrature-level error norms at the final time."""
    spaces = problem.spaces
    mesh = spaces.mesh
    p1v, p2v, g1, g2, wdet = _tabulate(mesh)
    xq = physical_quad_points(mesh.vertices, mesh.triangles)
    x, y = xq[:, :, 0], xq[:, :, 1]
    t = float(traj.times[-1])

    u = traj.u[-1]
    u_loc = np.empty((mesh.triangles.shape[0], 6, 2))
    u_loc[:, :, 0] = u[2 * spaces.tri_p2]
    u_loc[:, :, 1] = u[2 * spaces.tri_p2 + 1]
    uh = np.einsum("qj,tjc->tqc", p2v, u_loc)
    guh = np.einsum("tqjd,tjc->tqcd", g2, u_loc)
    ue = np.moveaxis(np.asarray(exact.u(x, y, t)), 0, -1)           # (nt, nq, 2)
    gue = np.moveaxis(np.asarray(exact.grad_u(x, y, t)), (0, 1), (-2, -1))
    err_u = np.einsum("tq,tqc->", wdet, (uh - ue) ** 2) \
        + np.einsum("tq,tqcd->", wdet, (guh - gue) ** 2)

    p = traj.p[-1]
    p_loc = p[mesh.triangles]
    ph = np.einsum("qr,tr->tq", p1v, p_loc)
    gph = np.einsum("tqrd,tr->tqd", g1, p_loc)
    pe = np.asarray(exact.p(x, y, t))
    gpe = np.moveaxis(np.asarray(exact.grad_p(x, y, t)), 0, -1)
    err_p_l2 = np.einsum("tq,tq->", wdet, (ph - pe) ** 2)
    err_p_h1 = np.einsum("tq,tqd->", wdet, (gph - gpe) ** 2)

    z_loc = traj.zeta[-1][mesh.triangles]
    zh = np.einsum("qr,tr->tq", p1v, z_loc)
    ze = np.asarray(exact.div_u(x, y, t))
    err_z = np.einsum("tq,tq->", wdet, (zh - ze) ** 2)

    return {"err_u_h1": float(np.sqrt(err_u)),
            "err_p_l2": float(np.sqrt(err_p_l2)),
            "err_p_h1semi": float(np.sqrt(err_p_h1)),
            "err_zeta_l2": float(np.sqrt(err_z))}


@dataclass
class RatesTable:
    case: str
    dt_rule: str
    rows: list = field(default_factory=list)

    def order(self, key: str) -> float:
        """Observed order between the two finest levels."""
        if len(self.rows) < 2:
            return float("nan")
        a, b = self.rows[-2], self.rows[-1]
        return float(np.log(a[key] / b[key]) / np.log(a["h"] / b["h"]))


def mms_convergence(case_name: str, levels=(4, 8, 16),
                    dt_rule: DtRule = DtRule.DT_PROPORTIONAL_H2,
                    T: float = 0.2, dt0: float | None = None,
                    tiny_dt: float | None = None,
                    model: PermeabilityModel | None = None) -> RatesTable:
    """Spatial convergence study against a registered exact solution.

    dt0 is the coarsest-level step for the proportional rule (default T/5);
    tiny_dt the fixed step for the tiny rule (default T/200).
    """
    case = get_case(case_name)
    if case.exact is None:
        raise ValueError(f"case {case.name!r} has no exact solution")
    if model is None:
        model = PermeabilityModel(PermeabilityLaw.CONSTANT, k0=1.0)
    if dt0 is None:
        dt0 = T / 5.0
    if tiny_dt is None:
        tiny_dt = T / 200.0
    layout = case.required_layout or BcLayout.ALL_DIRICHLET

    table = RatesTable(case=case.name, dt_rule=dt_rule.value)
    n0 = levels[0]
    for lvl, n in enumerate(levels):
        if dt_rule is DtRule.DT_PROPORTIONAL_H2:
            dt = dt0 * (n0 / n) ** 2
        else:
            dt = tiny_dt
        problem = make_problem(n, layout, case, model, dt, T)
        traj = solve_linear_biot(problem)
        errs = _solution_errors(problem, traj, case.exact)
        h = mesh_stats(problem.spaces.mesh)["h_max"]
        row = {"level": lvl, "n": n, "h": h, **errs}
        if table.rows:
            prev = table.rows[-1]
            row["order_u"] = float(np.log(prev["err_u_h1"] / row["err_u_h1"])
                                   / np.log(prev["h"] / row["h"]))
            row["order_p"] = float(np.log(prev["err_p_l2"] / row["err_p_l2"])
                                   / np.log(prev["h"] / row["h"]))
        else:
            row["order_u"] = float("nan")
            row["order_p"] = float("nan")
        table.rows.append(row)
    return table


def time_convergence(case_name: str, n: int = 16, dts=(0.1, 0.05, 0.025),
                     T: float = 0.5, ref_factor: int = 8,
                     model: PermeabilityModel | None = None) -> list[dict]:
    """Time-refinement study at fixed mesh.

    Two adjustments isolate the time-discretization error, which on a fixed
    mesh is otherwise contaminated:

    * errors are measured against a reference march on the same mesh with
      step min(dts)/ref_factor rather than against the exact solution, so
      the dt-independent spatial floor cancels exactly (every dt must be an
      integer multiple of the reference step);
    * the initial dilation is taken as the discrete dilation of the
      interpolated exact initial displacement instead of the interpolated
      dilation function. A datum outside the discrete divergence range is
      admissible for the march but makes the first pressure step absorb the
      mismatch scaled by 1/dt, a genuine initial layer that would dominate
      the Bochner error and hide the marching order.

    Returns one row per dt with the L2(0,T;L2) pressure error and the
    observed order between consecutive rows.
    """
    case = get_case(case_name)
    if case.exact is None:
        raise ValueError(f"case {case.name!r} has no exact solution")
    if model is None:
        model = PermeabilityModel(PermeabilityLaw.CONSTANT, k0=1.0)
    layout = case.required_layout or BcLayout.ALL_DIRICHLET

    dt_ref = min(dts) / ref_factor
    probe = make_problem(n, layout, case, model, dt_ref, T)
    u0 = interpolate(probe.spaces, SpaceKind.DISPLACEMENT,
                     lambda x, y: np.asarray(case.exact.u(x, y, 0.0)))
    mass_solver = RefinedSolver(probe.forms.pressure_mass)
    zeta0 = mass_solver.solve(probe.forms.coupling @ u0.values)

    ref_problem = make_problem(n, layout, case, model, dt_ref, T,
                               d0_override=zeta0)
    ref = solve_linear_biot(ref_problem)
    m = ref_problem.forms.pressure_mass

    rows = []
    for dt in dts:
        ratio = dt / dt_ref
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"dt={dt} is not a multiple of the reference step {dt_ref}")
        ratio = int(round(ratio))
        problem = make_problem(n, layout, case, model, dt, T,
                               d0_override=zeta0)
        traj = solve_linear_biot(problem)
        acc = 0.0
        for k in range(traj.times.size):
            d = traj.p[k] - ref.p[(k + 1) * ratio - 1]
            acc += dt * float(d @ (m @ d))
        err = float(np.sqrt(acc))
        row = {"dt": dt, "err_p_l2l2": err}
        if rows:
            prev = rows[-1]
            row["order"] = float(np.log(prev["err_p_l2l2"] / err)
                                 / np.log(prev["dt"] / dt))
        else:
            row["order"] = float("nan")
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# operator audits


def operator_audit(levels=(4, 8, 16),
                   layouts=(BcLayout.ALL_DIRICHLET, BcLayout.ALL_NEUMANN,
                            BcLayout.MIXED_LEFT_DIRICHLET),
                   seed: int = 20260819) -> list[dict]:
    """Dense-realization checks per level and layout.

    Each row records the kernel multiplicity (must be exactly one), the
    extreme eigenvalues, the mass-weighted symmetry residual, the norm of the
    map applied to the constant field, the worst image mean over seeded
    random inputs, and the drift of the smallest nonzero eigenvalue against
    the previous level of the same layout.
    """
    rng = np.random.default_rng(seed)
    rows: list[dict] = []
    prev_min: dict[str, float] = {}
    for layout in layouts:
        for n in levels:
            mesh = build_unit_square_mesh(n, layout)
            spaces = build_spaces(mesh)
            forms = build_forms(spaces)
            real = dense_dilation_matrix(forms)
            spec = dilation_spectrum(real)
            mass = real.mass
            ones = np.ones(spaces.n_p_dofs)
            const_img = real.matrix @ ones
            const_norm = float(np.sqrt(max(const_img @ (mass @ const_img), 0.0)))
            worst_mean = 0.0
            for _ in range(5):
                p = rng.standard_normal(spaces.n_p_dofs)
                img = real.matrix @ p
                worst_mean = max(worst_mean, abs(float(ones @ (mass @ img))))
            key = layout.value
            drift = float("nan")
            if key in prev_min and np.isfinite(spec.min_nonzero):
                drift = abs(spec.min_nonzero - prev_min[key]) / abs(prev_min[key])
            prev_min[key] = spec.min_nonzero
            rows.append({
                "layout": key, "n": n, "pressure_dofs": spaces.n_p_dofs,
                "zero_multiplicity": spec.zero_multiplicity,
                "theta_min_nonzero": spec.min_nonzero,
                "theta_max": spec.max_eigenvalue,
                "min_eigenvalue": float(spec.eigenvalues[0]),
                "symmetry_residual": real.symmetry_residual,
                "const_image_norm": const_norm,
                "max_image_mean": worst_mean,
                "drift_vs_prev": drift,
            })
    return rows


def oracle_compare(n: int, layout: BcLayout, case_name: str,
                   model: PermeabilityModel, dt: float, n_steps: int,
                   z_field: str = "zero") -> dict:
    """Dual-route check: monolithic march vs pressure-only march.

    Valid for cases without body force (the pressure-only reformulation
    eliminates the displacement assuming F = 0). The frozen permeability
    argument is taken from the named z-field registry, sampled per step.
    """
    case = get_case(case_name)
    if case.F is not None:
        raise ValueError(
            f"case {case.name!r} carries a body force; the pressure-only "
            "reformulation requires F = 0")
    T = dt * n_steps
    problem = make_problem(n, layout, case, model, dt, T)
    spaces = problem.spaces
    zfn = Z_FIELDS[z_field]
    z_steps = np.stack([
        interpolate(spaces, SpaceKind.PRESSURE,
                    lambda x, y, tv=t: zfn(x, y, tv)).values
        for t in problem.dt * np.arange(1, n_steps + 1)
    ])
    traj = solve_linear_biot(problem, z_steps)

    s_loads = np.empty((n_steps, spaces.n_p_dofs))
    for k, t in enumerate(traj.times):
        _, s_loads[k], _ = assemble_loads(spaces, None, problem.S, float(t),
                                          incompatible=problem.incompatible)
    reduced_p = reduced_solve(problem.forms, model, z_steps, s_loads,
                              problem.d0, dt)

    m = problem.forms.pressure_mass
    rows = []
    num = 0.0
    den = 0.0
    for k, t in enumerate(traj.times):
        d = traj.p[k] - reduced_p[k]
        dn = float(np.sqrt(max(d @ (m @ d), 0.0)))
        pn = float(np.sqrt(max(traj.p[k] @ (m @ traj.p[k]), 0.0)))
        num += dt * dn ** 2
        den += dt * pn ** 2
        rows.append({"step": k + 1, "time": float(t), "abs_l2_diff": dn,
                     "rel_l2_diff": dn / max(pn, 1e-300)})
    rel = float(np.sqrt(num) / max(np.sqrt(den), 1e-300))
    return {"rows": rows, "rel_l2l2": rel, "monolithic": traj,
            "reduced": reduced_p}


def compatibility_check(spaces: Spaces, S, times) -> dict:
    """Report the raw mean of the fluid source at each time (the all-Neumann
    layout requires it to vanish), before any mean correction."""
    mesh = spaces.mesh
    _, _, _, _, wdet = _tabulate(mesh)
    xq = physical_quad_points(mesh.vertices, mesh.triangles)
    rows = []
    worst = 0.0
    for t in times:
        if S is None:
            total = 0.0
        else:
            sv = np.asarray(S(xq[:, :, 0], xq[:, :, 1], float(t)), dtype=float)
            total = float((wdet * sv).sum())
        worst = max(worst, abs(total))
        rows.append({"time": float(t), "source_mean": total})
    return {"rows": rows, "max_abs_mean": worst}
