"""Command-line front end.

Subcommands: run (march + energy audit), mms (convergence studies),
operators (dense-map spectrum audit), audit (re-audit a stored run),
compare (monolithic vs pressure-only march).

Exit codes: 0 success, 2 configuration/data error, 3 fixed-point
non-convergence, 4 invariant or inequality violation. Failures emit one
machine-readable JSON line on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .assembly import IncompatibleSourceError
from .config import ConfigError, RunConfig, parse_config, resolved_items
from .diagnostics import (DtRule, energy_audit, mms_convergence, operator_audit,
                          oracle_compare, time_convergence)
from .registry import UnknownCaseError
from .solver import (BiotProblem, ProblemDataError, Trajectory, make_problem,
                     picard_solve)
from .vtk_io import write_vtk_snapshot

_CONFIG_ERRORS = (ConfigError, ProblemDataError, UnknownCaseError,
                  IncompatibleSourceError, FileNotFoundError, ValueError)


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _fail(code: int, error: str, message: str) -> int:
    print(json.dumps({"error": error, "message": message, "exit_code": code}),
          file=sys.stderr)
    return code


def _header_lines(cfg: RunConfig) -> list[str]:
    lines = [f"# porolab {__version__}"]
    lines.extend(f"# {key} = {value}" for key, value in resolved_items(cfg))
    return lines


def _write_csv(path: str, cfg: RunConfig, header: str, rows: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(_header_lines(cfg)) + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _write_config_echo(path: str, cfg: RunConfig) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# porolab {__version__} resolved configuration\n")
        for key, value in resolved_items(cfg):
            fh.write(f"{key} = {value}\n")


def _build_problem(cfg: RunConfig) -> BiotProblem:
    return make_problem(cfg.mesh_n, cfg.layout(), cfg.case, cfg.permeability(),
                        cfg.time_dt, cfg.time_T,
                        lam=cfg.physics_lambda, mu=cfg.physics_mu,
                        alpha=cfg.physics_alpha, c0=cfg.physics_c0,
                        incompatible=cfg.neumann_incompatible)


def _load_config(path: str) -> RunConfig:
    with open(path, "r") as fh:
        return parse_config(fh.read())


def _cmd_run(cfg: RunConfig) -> int:
    problem = _build_problem(cfg)
    traj, report = picard_solve(problem, cfg.picard(), tol=cfg.picard_tol,
                                max_iter=cfg.picard_max_iter)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    _write_config_echo(os.path.join(out, "config_echo.txt"), cfg)
    _write_csv(os.path.join(out, "picard.csv"), cfg, "iteration,residual",
               [f"{i + 1},{_fmt(r)}" for i, r in enumerate(report.residuals)])
    np.savez(os.path.join(out, "trajectory.npz"),
             times=traj.times, u=traj.u, p=traj.p, zeta=traj.zeta,
             multiplier=traj.multiplier, z_used=traj.z_used, d0=traj.d0,
             dt=np.array(traj.dt))
    digest = f"case={problem.case_name} bc={cfg.mesh_bc} n={cfg.mesh_n}"
    for k in range(traj.times.size):
        write_vtk_snapshot(
            os.path.join(out, f"step_{k + 1:04d}.vtk"), problem.spaces.mesh,
            traj.u[k], traj.p[k], traj.zeta[k], problem.model,
            title=f"porolab {__version__} {digest} step={k + 1}")
    for w in traj.warnings[:1]:
        print(f"warning: {w['warning']} (mean {w['mean']:.3e} at t={w['t']})")
    if not report.converged:
        return _fail(3, "NonConvergence",
                     f"fixed-point iteration did not reach tol={report.tol} "
                     f"within {report.max_iter} iterations "
                     f"(last residual {report.residuals[-1]:.3e})")
    ledger = energy_audit(problem, traj)
    _write_csv(os.path.join(out, "ledger.csv"), cfg,
               "step,time,u_energy,dissipation_cum,lhs,rhs,margin",
               [",".join([str(int(ledger.steps[i])), _fmt(ledger.times[i]),
                          _fmt(ledger.u_energy[i]), _fmt(ledger.dissipation_cum[i]),
                          _fmt(ledger.lhs[i]), _fmt(ledger.rhs[i]),
                          _fmt(ledger.margin[i])])
                for i in range(ledger.steps.size)])
    print(f"run: {traj.times.size} steps, picard {report.iterations} iteration(s), "
          f"converged={report.converged}, energy flag={ledger.flag}, "
          f"final margin={ledger.margin[-1]:.6e}")
    if not ledger.flag:
        return _fail(4, "EnergyInequalityViolation",
                     f"lhs={ledger.lhs[-1]:.17g} exceeds rhs={ledger.rhs[-1]:.17g}")
    return 0


def _cmd_mms(cfg: RunConfig) -> int:
    rule = DtRule.DT_PROPORTIONAL_H2 if cfg.mms_dt_rule == "h2" else DtRule.DT_FIXED_TINY
    table = mms_convergence(cfg.case, levels=cfg.mms_levels, dt_rule=rule,
                            T=cfg.mms_T, dt0=cfg.mms_dt0)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    rows = []
    for r in table.rows:
        rows.append(",".join([str(r["level"]), str(r["n"]), _fmt(r["h"]),
                              _fmt(r["err_u_h1"]), _fmt(r["err_p_l2"]),
                              _fmt(r["err_p_h1semi"]), _fmt(r["order_u"]),
                              _fmt(r["order_p"])]))
    _write_csv(os.path.join(out, "rates.csv"), cfg,
               "level,n,h,err_u_h1,err_p_l2,err_p_h1semi,order_u,order_p", rows)
    print(f"mms {table.case}: finest orders u_h1={table.order('err_u_h1'):.3f} "
          f"p_l2={table.order('err_p_l2'):.3f}")
    if cfg.mms_temporal_dts:
        trows = time_convergence(cfg.case, n=cfg.mesh_n,
                                 dts=cfg.mms_temporal_dts, T=cfg.time_T)
        _write_csv(os.path.join(out, "temporal.csv"), cfg, "dt,err_p_l2l2,order",
                   [",".join([_fmt(r["dt"]), _fmt(r["err_p_l2l2"]),
                              _fmt(r["order"])]) for r in trows])
        print(f"temporal order at n={cfg.mesh_n}: {trows[-1]['order']:.3f}")
    return 0


def _cmd_operators(cfg: RunConfig) -> int:
    rows = operator_audit(levels=cfg.ops_levels)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    header = ("layout,n,pressure_dofs,zero_multiplicity,theta_min_nonzero,"
              "theta_max,min_eigenvalue,symmetry_residual,const_image_norm,"
              "max_image_mean,drift_vs_prev")
    _write_csv(os.path.join(out, "operators.csv"), cfg, header,
               [",".join([r["layout"], str(r["n"]), str(r["pressure_dofs"]),
                          str(r["zero_multiplicity"]), _fmt(r["theta_min_nonzero"]),
                          _fmt(r["theta_max"]), _fmt(r["min_eigenvalue"]),
                          _fmt(r["symmetry_residual"]), _fmt(r["const_image_norm"]),
                          _fmt(r["max_image_mean"]), _fmt(r["drift_vs_prev"])])
                for r in rows])
    bad = [r for r in rows
           if r["zero_multiplicity"] != 1 or r["min_eigenvalue"] < -1e-11
           or r["symmetry_residual"] > 1e-10 or r["const_image_norm"] > 1e-10]
    print(f"operators: {len(rows)} audits, {len(bad)} violation(s)")
    if bad:
        r = bad[0]
        return _fail(4, "OperatorInvariantViolation",
                     f"layout={r['layout']} n={r['n']}: "
                     f"multiplicity={r['zero_multiplicity']}, "
                     f"min_eig={r['min_eigenvalue']:.3e}, "
                     f"symmetry={r['symmetry_residual']:.3e}")
    return 0


def _cmd_audit(run_dir: str) -> int:
    echo = os.path.join(run_dir, "config_echo.txt")
    store = os.path.join(run_dir, "trajectory.npz")
    cfg = _load_config(echo)
    data = np.load(store)
    problem = _build_problem(cfg)
    traj = Trajectory(times=data["times"], u=data["u"], p=data["p"],
                      zeta=data["zeta"], multiplier=data["multiplier"],
                      z_used=data["z_used"], d0=data["d0"],
                      dt=float(data["dt"]))
    forms = problem.forms
    for k in range(traj.times.size):
        check = forms.mass_solver.solve(forms.coupling @ traj.u[k])
        if np.linalg.norm(check - traj.zeta[k], np.inf) > 1e-11:
            return _fail(4, "TrajectoryInvariantViolation",
                         f"stored dilation at step {k + 1} does not match the "
                         "stored displacement")
    ledger = energy_audit(problem, traj)
    _write_csv(os.path.join(run_dir, "ledger_reaudit.csv"), cfg,
               "step,time,u_energy,dissipation_cum,lhs,rhs,margin",
               [",".join([str(int(ledger.steps[i])), _fmt(ledger.times[i]),
                          _fmt(ledger.u_energy[i]), _fmt(ledger.dissipation_cum[i]),
                          _fmt(ledger.lhs[i]), _fmt(ledger.rhs[i]),
                          _fmt(ledger.margin[i])])
                for i in range(ledger.steps.size)])
    print(f"audit: energy flag={ledger.flag}, final margin={ledger.margin[-1]:.6e}")
    if not ledger.flag:
        return _fail(4, "EnergyInequalityViolation",
                     f"lhs={ledger.lhs[-1]:.17g} exceeds rhs={ledger.rhs[-1]:.17g}")
    return 0


def _cmd_compare(cfg: RunConfig) -> int:
    result = oracle_compare(cfg.mesh_n, cfg.layout(), cfg.case,
                            cfg.permeability(), cfg.time_dt, cfg.compare_steps,
                            z_field=cfg.compare_z)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    rows = [",".join([str(r["step"]), _fmt(r["time"]), _fmt(r["abs_l2_diff"]),
                      _fmt(r["rel_l2_diff"])]) for r in result["rows"]]
    rows.append(f"# rel_l2l2 = {_fmt(result['rel_l2l2'])}")
    _write_csv(os.path.join(out, "compare.csv"), cfg,
               "step,time,abs_l2_diff,rel_l2_diff", rows)
    print(f"compare: relative discrepancy {result['rel_l2l2']:.3e}")
    if result["rel_l2l2"] > 1e-8:
        return _fail(4, "FormulationMismatch",
                     f"monolithic and pressure-only marches disagree: "
                     f"{result['rel_l2l2']:.3e} > 1e-8")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="porolab",
        description="Poroelastic flow solver and verification laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "march the coupled system and audit it"),
                            ("mms", "manufactured-solution convergence study"),
                            ("operators", "dense dilation-map spectrum audit"),
                            ("compare", "monolithic vs pressure-only march")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="flat key = value configuration file")
    ap = sub.add_parser("audit", help="re-audit a stored run directory")
    ap.add_argument("run_dir", help="directory produced by 'porolab run'")
    args = parser.parse_args(argv)

    try:
        if args.command == "audit":
            return _cmd_audit(args.run_dir)
        cfg = _load_config(args.config)
        if args.command == "run":
            return _cmd_run(cfg)
        if args.command == "mms":
            return _cmd_mms(cfg)
        if args.command == "operators":
            return _cmd_operators(cfg)
        return _cmd_compare(cfg)
    except _CONFIG_ERRORS as exc:
        return _fail(2, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
