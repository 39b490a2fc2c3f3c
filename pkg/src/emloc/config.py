"""Experiment configuration: a small sectioned ``key = value`` format.

Example::

    [mesh]
    divisions = 6          # int, or [nx, ny, nz]
    bounds = [[0, 0, 0], [1, 1, 1]]

    [physics]
    k = 1.0

Values are JSON literals (numbers, "strings", true/false, null, [arrays],
{objects}); ``#`` starts a comment outside strings. Unknown sections or
keys, duplicates, missing required keys and non-finite numbers are
reported with their line numbers, all at once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmlocError
from .materials import MaterialField
from .mesh import RegionSpec

KINDS = ("verify", "resonances", "localize", "runge", "runge-localize")
REQUIRED = (("mesh", "divisions"), ("physics", "k"))


class _Bad(Exception):
    pass


# -- validators: value -> normalized value, raise _Bad(message) -----------

def _finite(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise _Bad(f"expected a finite number, got {v!r}")
    return v


def _float(v):
    return float(_finite(v))


def _positive(v):
    v = _float(v)
    if not v > 0:
        raise _Bad(f"must be > 0, got {v!r}")
    return v


def _optional_positive(v):
    return None if v is None else _positive(v)


def _nonneg_or_null(v):
    if v is None:
        return None
    v = _float(v)
    if v < 0:
        raise _Bad(f"must be >= 0, got {v!r}")
    return v


def _int_at_least(lo):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise _Bad(f"expected an integer, got {v!r}")
        if v < lo:
            raise _Bad(f"must be >= {lo}, got {v}")
        return v
    return check


def _vec3(v):
    if not isinstance(v, list) or len(v) != 3:
        raise _Bad(f"expected [x, y, z], got {v!r}")
    return [_float(x) for x in v]


def _divisions(v):
    if isinstance(v, list):
        if len(v) != 3:
            raise _Bad(f"expected an integer or [nx, ny, nz], got {v!r}")
        return [_int_at_least(1)(x) for x in v]
    return _int_at_least(1)(v)


def _division_list(v):
    if not isinstance(v, list) or len(v) < 2:
        raise _Bad("expected a list of at least two division counts")
    out = [_int_at_least(1)(x) for x in v]
    if any(b <= a for a, b in zip(out, out[1:])):
        raise _Bad("division counts must be strictly increasing")
    return out


def _bounds(v):
    if not isinstance(v, list) or len(v) != 2:
        raise _Bad("expected [[x0, y0, z0], [x1, y1, z1]]")
    lo, hi = _vec3(v[0]), _vec3(v[1])
    if any(h <= l for l, h in zip(lo, hi)):
        raise _Bad("upper corner must exceed lower corner in every axis")
    return [lo, hi]


def _matrix(v):
    if isinstance(v, list) and len(v) == 3 and all(isinstance(r, list) for r in v):
        return [_vec3(r) for r in v]
    return _vec3(v)


def _material_regions(v):
    if not isinstance(v, list):
        raise _Bad("expected a list of {lower, upper, eps, mu} objects")
    out = []
    for i, r in enumerate(v):
        if not isinstance(r, dict):
            raise _Bad(f"region {i} is not an object")
        extra = set(r) - {"lower", "upper", "eps", "mu"}
        if extra:
            raise _Bad(f"region {i} has unknown keys {sorted(extra)}")
        if "lower" not in r or "upper" not in r:
            raise _Bad(f"region {i} needs lower and upper")
        item = {"lower": _vec3(r["lower"]), "upper": _vec3(r["upper"])}
        for key in ("eps", "mu"):
            if key in r:
                item[key] = _matrix(r[key])
        out.append(item)
    return out


def _choice(*options):
    def check(v):
        if v not in options:
            raise _Bad(f"expected one of {list(options)}, got {v!r}")
        return v
    return check


def _string(v):
    if not isinstance(v, str) or not v:
        raise _Bad(f"expected a non-empty string, got {v!r}")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise _Bad(f"expected true or false, got {v!r}")
    return v


_UNIT = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]

# section -> key -> (default, validator); order fixes the serialized layout.
SCHEMA = {
    "experiment": {
        "kind": ("localize", _choice(*KINDS)),
    },
    "mesh": {
        "bounds": (_UNIT, _bounds),
        "divisions": (None, _divisions),
    },
    "physics": {
        "k": (None, _positive),
    },
    "materials": {
        "eps": ([1.0, 1.0, 1.0], _matrix),
        "mu": ([1.0, 1.0, 1.0], _matrix),
        "regions": ([], _material_regions),
    },
    "gamma": {
        "lower": ([0.0, 0.0, 0.0], _vec3),
        "upper": ([1.0, 1.0, 0.0], _vec3),
    },
    "regions": {
        "M_lower": ([0.25, 0.25, 0.0], _vec3),
        "M_upper": ([0.75, 0.75, 0.25], _vec3),
        "D_lower": ([0.55, 0.55, 0.55], _vec3),
        "D_upper": ([0.95, 0.95, 0.95], _vec3),
        "O_lower": ([0.25, 0.25, 0.25], _vec3),
        "O_upper": ([0.75, 0.75, 0.75], _vec3),
    },
    "verify": {
        "case": ("plane_wave", _choice("plane_wave", "manufactured")),
        "divisions": ([2, 4, 8], _division_list),
        "direction": ([1.0, 2.0, 3.0], _vec3),
        "polarization": ([3.0, 0.0, -1.0], _vec3),
        "polarization_im": ([0.0, 0.0, 0.0], _vec3),
        "max_ratio": (0.6, _positive),
    },
    "resonances": {
        "k_max": (6.0, _positive),
        "count": (10, _int_at_least(1)),
    },
    "localize": {
        "L": (10, _int_at_least(1)),
        "delta": (None, _nonneg_or_null),
        "range_tol": (1e-4, _optional_positive),
    },
    "runge": {
        "alpha_start": (1e-2, _positive),
        "alpha_stop": (1e-10, _positive),
        "per_decade": (1, _int_at_least(1)),
        "direction": ([0.0, 0.0, 1.0], _vec3),
        "polarization": ([1.0, 0.0, 0.0], _vec3),
    },
    "output": {
        "dir": ("out", _string),
        "vtk": (True, _bool),
    },
}


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def parse_value(text):
    """JSON literal -> Python value; NaN and Infinity are rejected."""
    try:
        value = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise _Bad(f"cannot parse value {text!r}: {exc}") from None
    _check_finite(value)
    return value


def _check_finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        raise _Bad(f"non-finite number {v!r}")
    if isinstance(v, list):
        for x in v:
            _check_finite(x)
    if isinstance(v, dict):
        for x in v.values():
            _check_finite(x)


def _strip_comment(line):
    in_str = escaped = False
    for i, ch in enumerate(line):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return line[:i]
    return line


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``values[section][key]`` with defaults filled."""

    values: dict

    def __getitem__(self, section):
        return self.values[section]

    def get(self, dotted):
        section, key = dotted.split(".", 1)
        return self.values[section][key]

    @property
    def kind(self):
        return self.values["experiment"]["kind"]

    def with_overrides(self, assignments):
        """Apply ``section.key=value`` strings (value as in the file format)."""
        problems = []
        values = {s: dict(kv) for s, kv in self.values.items()}
        for item in assignments:
            where = f"--set {item!r}"
            if "=" not in item:
                problems.append(f"{where}: expected section.key=value")
                continue
            name, text = (p.strip() for p in item.split("=", 1))
            if "." not in name:
                problems.append(f"{where}: key must be written section.key")
                continue
            section, key = name.split(".", 1)
            if section not in SCHEMA or key not in SCHEMA[section]:
                problems.append(f"{where}: unknown key {name}")
                continue
            try:
                raw = parse_value(text)
            except _Bad:
                raw = text  # bare words are strings on the command line
            try:
                values[section][key] = SCHEMA[section][key][1](raw)
            except _Bad as exc:
                problems.append(f"{where}: {name}: {exc}")
        if problems:
            raise ConfigError(problems)
        return ExperimentConfig(values)

    # -- builders ---------------------------------------------------------

    def divisions(self):
        d = self.values["mesh"]["divisions"]
        return tuple(d) if isinstance(d, list) else (d, d, d)

    def bounds(self):
        lo, hi = self.values["mesh"]["bounds"]
        return tuple(lo), tuple(hi)

    def materials(self):
        m = self.values["materials"]
        eps_regions, mu_regions = [], []
        for r in m["regions"]:
            spec = RegionSpec(r["lower"], r["upper"])
            eps_regions.append((spec, np.asarray(r.get("eps", m["eps"]), dtype=float)))
            mu_regions.append((spec, np.asarray(r.get("mu", m["mu"]), dtype=float)))
        return (MaterialField(tuple(eps_regions), np.asarray(m["eps"], dtype=float)),
                MaterialField(tuple(mu_regions), np.asarray(m["mu"], dtype=float)))

    def gamma(self):
        g = self.values["gamma"]
        return RegionSpec(g["lower"], g["upper"], kind="boundary")

    def region(self, name):
        r = self.values["regions"]
        return RegionSpec(r[f"{name}_lower"], r[f"{name}_upper"])


def parse_config(text):
    """Parse and validate; raises ConfigError listing every problem."""
    problems = []
    seen_sections = {}
    seen_keys = {}
    raw = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line).strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                problems.append(f"line {lineno}: malformed section header {body!r}")
                section = None
                continue
            name = body[1:-1].strip()
            if name in seen_sections:
                problems.append(
                    f"line {lineno}: duplicate section [{name}] (first defined on line {seen_sections[name]})"
                )
                section = None
                continue
            seen_sections[name] = lineno
            if name not in SCHEMA:
                problems.append(f"line {lineno}: unknown section [{name}]")
                section = None
                continue
            section = name
            raw[section] = {}
            continue
        if "=" not in body:
            problems.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, text_value = (p.strip() for p in body.split("=", 1))
        if section is None:
            if not seen_sections:
                problems.append(f"line {lineno}: key {key!r} outside any section")
            continue
        where = f"line {lineno}: {section}.{key}"
        if key not in SCHEMA[section]:
            problems.append(f"{where}: unknown key")
            continue
        if (section, key) in seen_keys:
            problems.append(f"{where}: duplicate key (first set on line {seen_keys[section, key]})")
            continue
        seen_keys[section, key] = lineno
        try:
            raw[section][key] = SCHEMA[section][key][1](parse_value(text_value))
        except _Bad as exc:
            problems.append(f"{where}: {exc}")
    for section, key in REQUIRED:
        if (section, key) not in seen_keys:
            problems.append(f"missing required key {section}.{key}")
    if problems:
        raise ConfigError(problems)
    values = {
        s: {k: raw.get(s, {}).get(k, _copy(default)) for k, (default, _) in keys.items()}
        for s, keys in SCHEMA.items()
    }
    cfg = ExperimentConfig(values)
    _check_semantics(cfg)
    return cfg


def _copy(v):
    return json.loads(json.dumps(v))


def _check_semantics(cfg):
    """Cross-key checks that need the assembled objects."""
    problems = []
    try:
        cfg.materials()
    except EmlocError as exc:
        problems.append(f"materials: {exc}")
    for name in ("M", "D", "O"):
        try:
            cfg.region(name)
        except EmlocError as exc:
            problems.append(f"regions.{name}: {exc}")
    try:
        cfg.gamma()
    except EmlocError as exc:
        problems.append(f"gamma: {exc}")
    r = cfg["runge"]
    if r["alpha_stop"] >= r["alpha_start"]:
        problems.append("runge: alpha_stop must be smaller than alpha_start")
    if problems:
        raise ConfigError(problems)


def dump_config(cfg):
    """Canonical text; parse_config(dump_config(c)) == c."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {json.dumps(cfg.values[section][key])}")
        lines.append("")
    return "\n".join(lines)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    except UnicodeDecodeError as exc:
        raise ConfigError([f"{path}: not UTF-8 ({exc})"]) from exc
    return parse_config(text)
