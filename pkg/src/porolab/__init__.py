"""Finite-element solver and verification laboratory for quasi-static
poroelastic flow with incompressible constituents and dilation-dependent
permeability on the unit square."""

__version__ = "0.1.0"

from .assembly import (IncompatibleSourceError, PermeabilityLaw, PermeabilityModel,
                       assemble_diffusion, assemble_divergence_coupling,
                       assemble_elasticity, assemble_loads, assemble_pressure_mass,
                       eval_permeability, evaluate_dilation,
                       permeability_at_quadrature)
from .config import ConfigError, RunConfig, parse_config
from .diagnostics import (DtRule, EnergyLedger, RatesTable, compatibility_check,
                          energy_audit, mms_convergence, operator_audit,
                          oracle_compare, time_convergence)
from .mesh import BcLayout, EdgeTag, TriMesh, build_unit_square_mesh, mesh_stats
from .operators import (DenseCapError, DenseDilationRealization, DilationSpectrum,
                        DualNorm, DualNormKind, ElasticitySolver, FormSuite,
                        build_forms, dense_dilation_matrix, dilation_pairing,
                        dilation_spectrum, dual_norm, elastic_energy_norm,
                        pressure_to_dilation, reduced_solve, solve_elasticity)
from .registry import Case, UnknownCaseError, Z_FIELDS, case_names, get_case
from .solver import (BiotProblem, PicardMode, PicardReport, ProblemDataError,
                     Trajectory, fixed_point_map, l2l2_norm, make_problem,
                     picard_solve, solve_linear_biot, weak_form_residual)
from .spaces import (Field, PressureConstraint, SpaceKind, Spaces, build_spaces,
                     interpolate, mean_value, zero_mean_project)

__all__ = [name for name in dir() if not name.startswith("_")]
