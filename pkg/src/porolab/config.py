"""Flat key = value run configuration.

Lines hold one `key = value` pair; `#` starts a comment; blank lines are
skipped. Unknown keys, duplicates, and malformed values are rejected with
their line number. All keys have defaults, so an empty file is a valid
configuration.
"""
from __future__ import annotations

from dataclasses import dataclass

from .assembly import PermeabilityLaw, PermeabilityModel
from .mesh import BcLayout
from .solver import PicardMode


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


_BC_VALUES = {
    "dirichlet": BcLayout.ALL_DIRICHLET,
    "neumann": BcLayout.ALL_NEUMANN,
    "mixed_left": BcLayout.MIXED_LEFT_DIRICHLET,
}
_LAW_VALUES = {
    "constant": PermeabilityLaw.CONSTANT,
    "carman_kozeny": PermeabilityLaw.CARMAN_KOZENY,
    "quadratic": PermeabilityLaw.QUADRATIC,
}
_MODE_VALUES = {"global": PicardMode.GLOBAL, "per_step": PicardMode.PER_STEP}


def _parse_int(v: str) -> int:
    return int(v)


def _parse_float(v: str) -> float:
    return float(v)


def _parse_choice(options):
    def parse(v: str):
        if v not in options:
            raise ValueError(f"expected one of {sorted(options)}, got {v!r}")
        return v
    return parse


def _parse_int_list(v: str):
    return tuple(int(part) for part in v.split(",") if part.strip())


def _parse_float_list(v: str):
    return tuple(float(part) for part in v.split(",") if part.strip())


@dataclass
class RunConfig:
    mesh_n: int = 8
    mesh_bc: str = "dirichlet"
    physics_lambda: float = 1.0
    physics_mu: float = 1.0
    physics_alpha: float = 1.0
    physics_c0: float = 0.0
    perm_law: str = "constant"
    perm_k1: float = 1e-3
    perm_k2: float = 1e3
    perm_k0: float = 1.0
    perm_ck: float = 1.0
    perm_a: float = 1.0
    perm_b: float = 0.5
    perm_c: float = 0.25
    case: str = "smooth_forcing"
    time_dt: float = 0.05
    time_T: float = 0.5
    picard_mode: str = "global"
    picard_tol: float = 1e-8
    picard_max_iter: int = 50
    neumann_incompatible: str = "correct"
    out_dir: str = "out"
    mms_levels: tuple = (4, 8, 16)
    mms_dt_rule: str = "h2"
    mms_T: float = 0.2
    mms_dt0: float = 0.04
    mms_temporal_dts: tuple = ()
    ops_levels: tuple = (4, 8, 16)
    compare_steps: int = 10
    compare_z: str = "zero"

    def layout(self) -> BcLayout:
        return _BC_VALUES[self.mesh_bc]

    def picard(self) -> PicardMode:
        return _MODE_VALUES[self.picard_mode]

    def permeability(self) -> PermeabilityModel:
        return PermeabilityModel(law=_LAW_VALUES[self.perm_law],
                                 k1=self.perm_k1, k2=self.perm_k2,
                                 k0=self.perm_k0, ck=self.perm_ck,
                                 a=self.perm_a, b=self.perm_b, c=self.perm_c)


# dotted config key -> (dataclass attribute, value parser)
KEY_TABLE = {
    "mesh.n": ("mesh_n", _parse_int),
    "mesh.bc": ("mesh_bc", _parse_choice(_BC_VALUES)),
    "physics.lambda": ("physics_lambda", _parse_float),
    "physics.mu": ("physics_mu", _parse_float),
    "physics.alpha": ("physics_alpha", _parse_float),
    "physics.c0": ("physics_c0", _parse_float),
    "perm.law": ("perm_law", _parse_choice(_LAW_VALUES)),
    "perm.k1": ("perm_k1", _parse_float),
    "perm.k2": ("perm_k2", _parse_float),
    "perm.k0": ("perm_k0", _parse_float),
    "perm.ck": ("perm_ck", _parse_float),
    "perm.a": ("perm_a", _parse_float),
    "perm.b": ("perm_b", _parse_float),
    "perm.c": ("perm_c", _parse_float),
    "case": ("case", str),
    "time.dt": ("time_dt", _parse_float),
    "time.T": ("time_T", _parse_float),
    "picard.mode": ("picard_mode", _parse_choice(_MODE_VALUES)),
    "picard.tol": ("picard_tol", _parse_float),
    "picard.max_iter": ("picard_max_iter", _parse_int),
    "neumann.incompatible": ("neumann_incompatible",
                             _parse_choice({"correct", "strict"})),
    "out.dir": ("out_dir", str),
    "mms.levels": ("mms_levels", _parse_int_list),
    "mms.dt_rule": ("mms_dt_rule", _parse_choice({"h2", "fixed_tiny"})),
    "mms.T": ("mms_T", _parse_float),
    "mms.dt0": ("mms_dt0", _parse_float),
    "mms.temporal_dts": ("mms_temporal_dts", _parse_float_list),
    "ops.levels": ("ops_levels", _parse_int_list),
    "compare.steps": ("compare_steps", _parse_int),
    "compare.z": ("compare_z", str),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in KEY_TABLE.items()}


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEY_TABLE:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} (first set on line {seen[key]})", lineno)
        seen[key] = lineno
        attr, parser = KEY_TABLE[key]
        try:
            setattr(cfg, attr, parser(value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
    return cfg


def resolved_items(cfg: RunConfig) -> list[tuple[str, str]]:
    """Canonical (dotted key, rendered value) pairs, in table order."""
    items = []
    for key, (attr, _) in KEY_TABLE.items():
        v = getattr(cfg, attr)
        if isinstance(v, tuple):
            rendered = ",".join(_render(x) for x in v)
        else:
            rendered = _render(v)
        items.append((key, rendered))
    return items


def _render(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)
