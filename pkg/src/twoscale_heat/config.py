"""Experiment configuration: one INI-style text file with nested sections.

Example::

    [domain]
    rect = 0 0 2 2
    source = 100.0                 # J/(cm^3 s)
    boundary_temperature = 373.15  # K, on the whole boundary by default

    [solver]
    cell_divisions = 64
    macro_resolution = 64          # element pairs per cm
    fine_per_cell_divisions = 20   # divisions per period of the smallest eps
    tolerance = 1e-10

    [cell Q1]
    inclusion = circle 0.5 0.5 0.25
    k_matrix = 100.0               # W/(m K), converted to W/(cm K) internally
    k_inclusion = 0.1

    [subdomain 1]
    region = 0 0 1 1
    cell = Q1
    epsilon = 1/6

Lengths are centimetres, sources J/(cm^3 s), temperatures K.  Conductivities
are given in W/(m K) as is conventional for material data and are converted
to W/(cm K) (factor 0.01) so that all units are consistent; set
``conductivity_unit = W/(cm K)`` in [domain] to skip the conversion.

``source``, ``boundary_temperature`` and ``boundary_flux`` accept arithmetic
expressions in x and y (e.g. ``300 + 25*x``).
"""

import configparser
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .mesh import Inclusion, Rect, SubdomainSpec, UnitCellSpec, SIDES

_CONDUCTIVITY_UNITS = {
    "W/(m K)": 0.01,
    "W/(cm K)": 1.0,
}

_EXPR_NAMES = {
    "pi": math.pi,
    "e": math.e,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
    "where": np.where,
}


def compile_expression(text: str, where: str) -> Callable:
    """Turn a constant or an expression in x, y into a vectorized callable."""
    text = text.strip()
    try:
        value = float(text)
        return lambda x, y: np.full_like(np.asarray(x, dtype=np.float64), value)
    except ValueError:
        pass
    try:
        code = compile(text, where, "eval")
    except SyntaxError as exc:
        raise ConfigError(f"{where}: cannot parse expression {text!r}: {exc}") from None
    unknown = set(code.co_names) - set(_EXPR_NAMES) - {"x", "y"}
    if unknown:
        raise ConfigError(f"{where}: unknown names in expression: {sorted(unknown)}")

    def f(x, y):
        env = dict(_EXPR_NAMES)
        env["x"] = x
        env["y"] = y
        return eval(code, {"__builtins__": {}}, env)  # noqa: S307 - names whitelisted

    return f


def _parse_fraction(text: str, where: str) -> float:
    try:
        if "/" in text:
            return float(Fraction(text.strip()))
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: bad number {text!r}: {exc}") from None


def _floats(text: str, n: int, where: str) -> List[float]:
    parts = text.split()
    if len(parts) != n:
        raise ConfigError(f"{where}: expected {n} numbers, got {text!r}")
    return [_parse_fraction(p, where) for p in parts]


@dataclass
class ExperimentConfig:
    """Validated, unit-converted experiment description."""

    name: str
    domain: Rect
    subdomains: List[SubdomainSpec]
    cells: Dict[str, UnitCellSpec]
    source: Callable
    dirichlet: Callable
    neumann_sides: Tuple[str, ...] = ()
    neumann_flux: Optional[Callable] = None
    cell_divisions: int = 64
    macro_resolution: int = 64
    fine_per_cell_divisions: int = 20
    tolerance: float = 1e-10
    output_dir: Optional[Path] = None

    def with_epsilon(self, epsilon: float) -> "ExperimentConfig":
        """Copy of the config with every subdomain period replaced."""
        subs = [replace(sd, epsilon=epsilon) for sd in self.subdomains]
        for sd in subs:
            sd.validate()
        return replace(self, subdomains=subs)


def _get(section, key, where, default=None):
    if key not in section:
        if default is not None:
            return default
        raise ConfigError(f"{where}: missing key {key!r}")
    return section[key]


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#", ";")
    )
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    if "domain" not in parser:
        raise ConfigError(f"{path}: missing [domain] section")
    dom = parser["domain"]
    where = f"{path}:[domain]"
    x0, y0, x1, y1 = _floats(_get(dom, "rect", where), 4, where)
    try:
        domain = Rect(x0, y0, x1, y1)
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from None
    source = compile_expression(_get(dom, "source", where, "0"), where)
    dirichlet = compile_expression(_get(dom, "boundary_temperature", where), where)
    unit = _get(dom, "conductivity_unit", where, "W/(m K)").strip()
    if unit not in _CONDUCTIVITY_UNITS:
        raise ConfigError(
            f"{where}: conductivity_unit must be one of {sorted(_CONDUCTIVITY_UNITS)}"
        )
    k_scale = _CONDUCTIVITY_UNITS[unit]
    neumann_sides = tuple(_get(dom, "neumann_sides", where, "").split())
    bad_sides = set(neumann_sides) - set(SIDES)
    if bad_sides:
        raise ConfigError(f"{where}: unknown boundary sides {sorted(bad_sides)}")
    neumann_flux = None
    if "boundary_flux" in dom:
        neumann_flux = compile_expression(dom["boundary_flux"], where)

    solver = parser["solver"] if "solver" in parser else {}
    where_s = f"{path}:[solver]"

    def _int(key, default):
        raw = solver.get(key) if hasattr(solver, "get") else None
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where_s}: {key} must be an integer") from None

    cell_divisions = _int("cell_divisions", 64)
    macro_resolution = _int("macro_resolution", 64)
    fine_per_cell = _int("fine_per_cell_divisions", 20)
    tolerance = float(solver.get("tolerance", "1e-10")) if solver else 1e-10

    cells: Dict[str, UnitCellSpec] = {}
    subdomains: List[SubdomainSpec] = []
    for section in parser.sections():
        if section.startswith("cell "):
            cell_id = section.split(None, 1)[1].strip()
            sec = parser[section]
            where_c = f"{path}:[{section}]"
            inc_text = _get(sec, "inclusion", where_c, "none").split()
            if inc_text[0] == "none":
                inclusion = Inclusion()
            else:
                if len(inc_text) != 4:
                    raise ConfigError(
                        f"{where_c}: inclusion must be 'none' or '<kind> <cx> <cy> <size>'"
                    )
                inclusion = Inclusion(
                    kind=inc_text[0],
                    center=(
                        _parse_fraction(inc_text[1], where_c),
                        _parse_fraction(inc_text[2], where_c),
                    ),
                    size=_parse_fraction(inc_text[3], where_c),
                )
            spec = UnitCellSpec(
                cell_id=cell_id,
                divisions=int(sec.get("divisions", cell_divisions)),
                inclusion=inclusion,
                k_matrix=k_scale * _parse_fraction(_get(sec, "k_matrix", where_c), where_c),
                k_inclusion=k_scale * _parse_fraction(_get(sec, "k_inclusion", where_c), where_c),
            )
            try:
                spec.validate()
            except Exception as exc:
                raise ConfigError(f"{where_c}: {exc}") from None
            cells[cell_id] = spec
        elif section.startswith("subdomain"):
            sec = parser[section]
            where_d = f"{path}:[{section}]"
            rx0, ry0, rx1, ry1 = _floats(_get(sec, "region", where_d), 4, where_d)
            sd = SubdomainSpec(
                region=Rect(rx0, ry0, rx1, ry1),
                cell_id=_get(sec, "cell", where_d),
                epsilon=_parse_fraction(_get(sec, "epsilon", where_d), where_d),
            )
            try:
                sd.validate()
            except Exception as exc:
                raise ConfigError(f"{where_d}: {exc}") from None
            subdomains.append(sd)

    if not cells:
        raise ConfigError(f"{path}: no [cell <id>] sections")
    if not subdomains:
        raise ConfigError(f"{path}: no [subdomain <name>] sections")
    for sd in subdomains:
        if sd.cell_id not in cells:
            raise ConfigError(f"{path}: subdomain {sd.region} references unknown cell {sd.cell_id!r}")

    output_dir = None
    if "output" in parser and "directory" in parser["output"]:
        output_dir = Path(parser["output"]["directory"])

    return ExperimentConfig(
        name=path.stem,
        domain=domain,
        subdomains=subdomains,
        cells=cells,
        source=source,
        dirichlet=dirichlet,
        neumann_sides=neumann_sides,
        neumann_flux=neumann_flux,
        cell_divisions=cell_divisions,
        macro_resolution=macro_resolution,
        fine_per_cell_divisions=fine_per_cell,
        tolerance=tolerance,
        output_dir=output_dir,
    )
