"""``key = value`` problem configuration files.

Lines starting with ``#`` are comments. Numbers may carry a unit suffix,
e.g. ``E = 100 GPa`` or ``kappa = 11 nJ/V^2/m``; values are converted to SI.
Lists are comma separated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ParseError
from .material import MaterialParameters

PRESETS = ("convergence2d", "convergence2d-coupled", "beta-sweep", "cantilever", "circuit-compare",
           "periodic2d", "convergence3d", "beta-estimate", "patch-test")

DEFAULT_ALPHA = 100.0

_PREFIX = {"": 1.0, "G": 1e9, "M": 1e6, "k": 1e3, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "n": 1e-9, "p": 1e-12}
_BASE_UNITS = ("Pa", "J/V^2/m", "J/V/m^2", "J/V/m", "C/m^2", "C/m", "F/m", "N/m", "N", "V", "m")
_UNIT_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-zµ/^0-9]*)\s*$")


def parse_quantity(text):
    """Float with an optional SI-prefixed unit, e.g. ``"11 nJ/V^2/m"`` -> 1.1e-8."""
    m = _UNIT_RE.match(text)
    if not m:
        raise ValueError(f"not a number: {text!r}")
    value = float(m.group(1))
    unit = m.group(2)
    if not unit:
        return value
    for base in _BASE_UNITS:
        if unit.endswith(base) and unit[: -len(base)] in _PREFIX:
            return value * _PREFIX[unit[: -len(base)]]
    raise ValueError(f"unknown unit {unit!r}")


@dataclass(frozen=True)
class ProblemSpec:
    preset: str = "convergence2d"
    p: int | None = None
    levels: int | None = None
    base_divisions: int | None = None
    pattern: str = "alternating"
    mesh: str | None = None
    beta_mode: str = "formula"
    alpha: float = DEFAULT_ALPHA
    beta: float | None = None
    beta_D: float | None = None
    coupling: str | None = None
    material: MaterialParameters | None = None
    a_prime: tuple = ()
    alphas: tuple = ()
    circuit: str | None = None
    deterministic: bool = True
    out: str = "."

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ParseError(f"unknown preset {self.preset!r}", key="preset")
        if self.beta_mode not in ("formula", "estimated", "explicit"):
            raise ParseError(f"beta_mode must be formula, estimated or explicit, got {self.beta_mode!r}",
                             key="beta_mode")
        if self.beta_mode == "explicit" and self.beta is None:
            raise ParseError("beta_mode=explicit needs a beta value", key="beta")
        if self.levels is not None and self.levels < 1:
            raise ParseError("levels must be >= 1", key="levels")
        if self.coupling not in (None, "uncoupled", "piezo", "flexo", "full"):
            raise ParseError(f"unknown coupling {self.coupling!r}", key="coupling")
        if self.circuit not in (None, "open", "closed"):
            raise ParseError(f"unknown circuit {self.circuit!r}", key="circuit")

    def with_(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


_MATERIAL_KEYS = {"E", "nu", "l", "kappa", "eL", "eT", "eS", "muL", "muT", "muS", "piezo_axis", "plane"}


def _as_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _as_list(text):
    return tuple(parse_quantity(t) for t in text.split(",") if t.strip())


_CONVERTERS = {
    "preset": str, "p": int, "levels": int, "base_divisions": int, "pattern": str, "mesh": str,
    "beta_mode": str, "alpha": parse_quantity, "beta": parse_quantity, "beta_D": parse_quantity,
    "coupling": str, "a_prime": _as_list, "alphas": _as_list, "circuit": str,
    "deterministic": _as_bool, "out": str,
}


def _material_value(key, text):
    if key == "plane":
        return text.strip()
    if key == "piezo_axis":
        return int(text)
    if key == "kappa" and "," in text:
        return _as_list(text)
    return parse_quantity(text)


def parse_config_text(text, source="<config>") -> ProblemSpec:
    values, material, seen = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {raw.strip()!r}", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first on line {seen[key]})", line=lineno, key=key)
        seen[key] = lineno
        try:
            if key in _MATERIAL_KEYS:
                material[key] = _material_value(key, val)
            elif key in _CONVERTERS:
                values[key] = _CONVERTERS[key](val)
            else:
                raise ParseError(f"unknown key {key!r}", line=lineno, key=key)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad value for {key!r}: {exc}", line=lineno, key=key) from exc

    if "beta" in values:
        mode = values.get("beta_mode", "explicit")
        if mode != "explicit":
            raise ParseError(f"beta_mode={mode} conflicts with an explicit beta value", key="beta")
        values["beta_mode"] = "explicit"
    if "alpha" in values and values.get("beta_mode") in ("explicit", "estimated"):
        raise ParseError(f"alpha conflicts with beta_mode={values['beta_mode']}", key="alpha")
    if material:
        from .problems import BEAM_MATERIAL, CONVERGENCE_MATERIAL
        preset = values.get("preset", "convergence2d")
        base = BEAM_MATERIAL if preset in ("cantilever", "circuit-compare") else CONVERGENCE_MATERIAL
        try:
            values["material"] = base.with_(**material)
        except TypeError as exc:
            raise ParseError(str(exc)) from exc
    try:
        return ProblemSpec(**values)
    except ParseError as exc:
        line = seen.get(exc.key)
        if line is not None and exc.line is None:
            raise ParseError(str(exc), line=line, key=exc.key) from None
        raise


def parse_config(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def spec_fields():
    return [f.name for f in fields(ProblemSpec)] + sorted(_MATERIAL_KEYS)
