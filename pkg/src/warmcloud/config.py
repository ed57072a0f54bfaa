"""Run configuration: INI-style sections, a small expression grammar, env overrides.

Sections: ``grid``, ``physics``, ``velocity``, ``initial``,
``boundary.T``/``boundary.qv``/``boundary.qc``/``boundary.qr``,
``stepping``, ``output``, ``diagnostics``, ``run``, ``mms``.  Unknown
sections or keys are rejected.  Any key can be overridden from the
environment as ``WARMCLOUD_<SECTION>_<KEY>`` (section dots become
underscores, matching is case-insensitive), e.g.
``WARMCLOUD_STEPPING_T_END=0.5`` or ``WARMCLOUD_BOUNDARY_QV_B0=0.01``.

Expressions use constants, ``+ - * / **``, unary minus, parentheses,
``sin``, ``cos``, ``exp``, ``pi`` and the variables ``x, y, p, t``.
"""

from __future__ import annotations

import ast
import configparser
import dataclasses
import math
import operator
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import FIELDS, ConfigError, PhysParams

ENV_PREFIX = "WARMCLOUD_"

# ---------------------------------------------------------------- expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": math.pi}
VARIABLES = ("x", "y", "p", "t")


class Expression:
    """A parsed closed-form expression, callable as ``f(x, y, p, t)``."""

    def __init__(self, text: str, variables=VARIABLES):
        self.text = str(text).strip()
        self.variables = tuple(variables)
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as err:
            raise ConfigError(f"cannot parse expression {self.text!r}: {err.msg}") from None
        self._check(tree.body)
        self._tree = tree.body

    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigError(f"only numeric constants are allowed in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in self.variables and node.id not in _CONSTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.text!r} "
                                  f"(allowed: {', '.join(self.variables)}, pi)")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"operator not allowed in {self.text!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNARY:
                raise ConfigError(f"operator not allowed in {self.text!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ConfigError(f"only sin, cos, exp may be called in {self.text!r}")
            if len(node.args) != 1 or node.keywords:
                raise ConfigError(f"functions take exactly one argument in {self.text!r}")
            self._check(node.args[0])
        else:
            raise ConfigError(f"unsupported syntax {type(node).__name__} in {self.text!r}")

    def _eval(self, node, env):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNARY[type(node.op)](self._eval(node.operand, env))
        return _FUNCS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, *args):
        env = dict(zip(self.variables, args))
        shape = np.broadcast(*[np.asarray(a) for a in args]).shape if args else ()
        with np.errstate(all="ignore"):
            val = self._eval(self._tree, env)
        return np.broadcast_to(np.asarray(val, dtype=float), shape).copy() if shape else float(val)

    @property
    def is_constant(self) -> bool:
        return not any(isinstance(n, ast.Name) and n.id in self.variables for n in ast.walk(self._tree))

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.text == other.text

    def __hash__(self):
        return hash(self.text)


# ---------------------------------------------------------------- schema

def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float_or_inf(s):
    v = str(s).strip().lower()
    return math.inf if v in ("inf", "infinity", "none") else float(v)


def _opt_float(s):
    v = str(s).strip().lower()
    return None if v in ("auto", "none", "") else float(v)


def _list(conv):
    def parse(s):
        if isinstance(s, (list, tuple)):
            return [conv(v) for v in s]
        return [conv(v.strip()) for v in str(s).split(",") if v.strip()]
    return parse


def _choice(*options):
    def parse(s):
        v = str(s).strip()
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v
    return parse


def _expr(s):
    return Expression(s)


def _opt_str(s):
    v = str(s).strip()
    return None if v in ("", "none", "auto") else v


_PHYS_FIELDS = {f.name for f in dataclasses.fields(PhysParams)}

# section -> key -> (parser, default); a default of REQUIRED must be given
REQUIRED = object()
PRESET_DEFAULTS = {
    "si": {"grid.p0": 1e5, "grid.p1": 2e4, "grid.Tbar": "250", "initial.T": "280"},
    "nondimensional": {"grid.p0": 1.0, "grid.p1": 0.2, "grid.Tbar": "1", "initial.T": "1"},
}

SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "grid": {"nx": (int, REQUIRED), "ny": (int, REQUIRED), "np": (int, REQUIRED),
             "Lx": (float, 1.0), "Ly": (float, 1.0), "p0": (float, None), "p1": (float, None),
             "Tbar": (Expression, None)},
    "physics": {"preset": (_choice("si", "nondimensional"), "si")},
    "velocity": {"kind": (_choice("analytic", "file", "zero"), "zero"), "amplitude": (float, 0.0),
                 "mx": (int, 1), "my": (int, 1), "modulation": (Expression, "1"),
                 "file": (_opt_str, None), "div_tol": (_opt_float, None), "flux_tol": (_opt_float, None),
                 "r": (_float_or_inf, math.inf), "q": (_float_or_inf, math.inf)},
    "initial": {"T": (Expression, None), "qv": (Expression, "0"), "qc": (Expression, "0"),
                "qr": (Expression, "0"), "snapshot": (_opt_str, None), "noise": (float, 0.0)},
    "stepping": {"t_end": (float, REQUIRED), "scheme": (_choice("euler", "rk2", "strang"), "euler"),
                 "cfl_adv": (float, 0.9), "cfl_diff": (float, 0.9), "cfl_sed": (float, 0.9),
                 "cfl_src": (float, 0.9), "dt_max": (_float_or_inf, math.inf), "dt_min": (float, 1e-12),
                 "clip": (_bool, False), "limiter": (_choice("none", "minmod"), "none"),
                 "sources": (_bool, True), "sedimentation": (_bool, True)},
    "output": {"directory": (str, "out"), "interval": (_opt_float, None),
               "formats": (_list(_choice("vtk", "checkpoint", "csv")), ["checkpoint"]),
               "csv_levels": (_list(int), []), "snapshots": (_bool, True)},
    "diagnostics": {"M": (_opt_float, None), "k_max": (int, 8), "tol_neg": (float, 1e-12),
                    "tol_qv": (float, 1e-10), "qv_star": (_opt_float, None)},
    "run": {"seed": (int, 0), "workers": (int, 1), "name": (str, "run")},
    "mms": {"case": (_choice("diffusion", "advection", "constant"), "diffusion"),
            "levels": (_list(int), [16, 32, 64]), "t_end": (_opt_float, None)},
}
for _f in FIELDS:
    SCHEMA[f"boundary.{_f}"] = {"alpha0": (Expression, "0"), "b0": (Expression, "0"),
                                "alphal": (Expression, "0"), "bl": (Expression, "0")}
for _name in sorted(_PHYS_FIELDS):
    SCHEMA["physics"][_name] = (_opt_float if _name == "kappa1" else float, None)

SECTIONS = tuple(SCHEMA)


@dataclass
class RunConfig:
    """Validated configuration with every default filled in."""

    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.sections == other.sections

    def params(self) -> PhysParams:
        ph = self.sections["physics"]
        vals = {k: v for k, v in ph.items() if k != "preset" and k != "kappa1"}
        vals["kappa1"] = ph.get("kappa1")
        return PhysParams(**vals)

    def replace(self, **updates) -> "RunConfig":
        """Copy with ``section__key=value`` updates applied (then re-validated)."""
        raw = serialize_dict(self)
        for k, v in updates.items():
            sec, key = k.split("__", 1)
            sec = sec.replace("_", ".") if sec.startswith("boundary_") else sec
            raw.setdefault(sec, {})[key] = _to_text(v)
        return materialize(raw, self.source)


def _to_text(v) -> str:
    if isinstance(v, Expression):
        return v.text
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(_to_text(x) for x in v)
    if v is None:
        return "auto"
    return str(v)


def _line_of(text: str | None, section: str, key: str) -> int | None:
    if text is None:
        return None
    cur = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
        elif cur == section and re.match(rf"^{re.escape(key)}\s*[=:]", s):
            return i
    return None


def _where(path, text, section, key):
    line = _line_of(text, section, key)
    loc = f"{path}:{line}: " if (path and line) else (f"line {line}: " if line else "")
    return f"{loc}[{section}] {key}"


def materialize(raw: dict[str, dict[str, str]], path=None, text=None) -> RunConfig:
    """Typed, validated RunConfig from raw string sections."""
    for sec in raw:
        if sec not in SCHEMA:
            line = next((i for i, ln in enumerate((text or "").splitlines(), 1) if ln.strip() == f"[{sec}]"), None)
            loc = f"{path or '<string>'}:{line}: " if line else ""
            raise ConfigError(f"{loc}unknown section [{sec}] (known: {', '.join(SCHEMA)})")
    preset = raw.get("physics", {}).get("preset", "si").strip()
    if preset not in PRESET_DEFAULTS:
        raise ConfigError(f"{_where(path, text, 'physics', 'preset')}: unknown preset {preset!r}")
    out = {}
    for sec, keys in SCHEMA.items():
        given = dict(raw.get(sec, {}))
        for k in given:
            if k not in keys:
                raise ConfigError(f"{_where(path, text, sec, k)}: unknown key")
        vals = {}
        for k, (conv, default) in keys.items():
            if k in given:
                try:
                    vals[k] = conv(given[k])
                except ConfigError as err:
                    raise ConfigError(f"{_where(path, text, sec, k)}: {err}") from None
                except (TypeError, ValueError) as err:
                    raise ConfigError(f"{_where(path, text, sec, k)}: invalid value {given[k]!r} ({err})") from None
            elif default is REQUIRED:
                raise ConfigError(f"[{sec}] {k} is required")
            else:
                pd = PRESET_DEFAULTS[preset].get(f"{sec}.{k}")
                d = pd if pd is not None else default
                vals[k] = conv(d) if isinstance(d, str) and conv not in (str, _opt_str) else d
        out[sec] = vals
    # physics: fill omitted constants from the preset
    base = (PhysParams.nondimensional() if preset == "nondimensional" else PhysParams()).as_dict()
    given_phys = raw.get("physics", {})
    for k in _PHYS_FIELDS:
        if k not in given_phys:
            out["physics"][k] = None if k == "kappa1" else base[k]
    if "kappa1" in given_phys and out["physics"]["kappa1"] is None:
        out["physics"]["kappa1"] = None
    cfg = RunConfig(out, str(path) if path else None)
    _validate(cfg, path, text)
    return cfg


def _validate(cfg: RunConfig, path=None, text=None):
    ph = cfg["physics"]
    if ph["beta"] != 1.0:
        raise ConfigError(f"{_where(path, text, 'physics', 'beta')}: beta={ph['beta']} rejected; only the "
                          "evaporation exponent beta = 1 is covered by the well-posedness theory "
                          "(the case beta in (0,1) is left open)")
    try:
        cfg.params()
    except ConfigError as err:
        raise ConfigError(f"[physics] {err}") from None
    g = cfg["grid"]
    for k in ("nx", "ny", "np"):
        if g[k] < 2:
            raise ConfigError(f"{_where(path, text, 'grid', k)}: must be >= 2, got {g[k]}")
    if not g["p0"] > g["p1"] > 0:
        raise ConfigError(f"{_where(path, text, 'grid', 'p1')}: need p0 > p1 > 0")
    if not (g["Lx"] > 0 and g["Ly"] > 0):
        raise ConfigError("[grid] Lx and Ly must be positive")
    st = cfg["stepping"]
    for k in ("cfl_adv", "cfl_diff", "cfl_sed", "cfl_src"):
        if not 0 < st[k] <= 1:
            raise ConfigError(f"{_where(path, text, 'stepping', k)}: must lie in (0, 1]")
    if st["t_end"] < 0:
        raise ConfigError("[stepping] t_end must be nonnegative")
    if st["dt_max"] <= 0:
        raise ConfigError("[stepping] dt_max must be positive")
    v = cfg["velocity"]
    if v["kind"] == "file" and not v["file"]:
        raise ConfigError("[velocity] kind = file needs a file path")
    if v["kind"] == "analytic" and (v["mx"] < 1 or v["my"] < 1):
        raise ConfigError("[velocity] mode counts must be positive")
    o = cfg["output"]
    if o["interval"] is not None and o["interval"] <= 0:
        raise ConfigError("[output] interval must be positive")
    for lv in o["csv_levels"]:
        if not 0 <= lv < g["np"]:
            raise ConfigError(f"[output] csv level {lv} outside 0..{g['np'] - 1}")
    d = cfg["diagnostics"]
    if d["k_max"] < 1:
        raise ConfigError("[diagnostics] k_max must be >= 1")
    if cfg["run"]["workers"] < 1:
        raise ConfigError("[run] workers must be >= 1")
    if len(cfg["mms"]["levels"]) < 3:
        raise ConfigError("[mms] levels needs at least 3 grids")


def _read_raw(text: str, path=None) -> dict[str, dict[str, str]]:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path or "<string>"))
    except configparser.MissingSectionHeaderError as err:
        raise ConfigError(f"{path or '<string>'}:{err.lineno}: key outside any [section]") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as err:
        raise ConfigError(f"{path or '<string>'}:{err.lineno}: {err.message if hasattr(err, 'message') else err}") from None
    except configparser.ParsingError as err:
        lineno = err.errors[0][0] if err.errors else "?"
        raise ConfigError(f"{path or '<string>'}:{lineno}: syntax error: {err.errors[0][1].strip() if err.errors else ''}") from None
    return {sec: dict(cp[sec]) for sec in cp.sections()}


def apply_env(raw: dict[str, dict[str, str]], environ=None) -> dict[str, dict[str, str]]:
    env = os.environ if environ is None else environ
    by_prefix = sorted(((s.upper().replace(".", "_") + "_", s) for s in SCHEMA), key=lambda x: -len(x[0]))
    for var, val in env.items():
        if not var.startswith(ENV_PREFIX):
            continue
        rest = var[len(ENV_PREFIX):]
        for pre, sec in by_prefix:
            if rest.upper().startswith(pre):
                keyu = rest[len(pre):]
                matches = [k for k in SCHEMA[sec] if k.upper() == keyu.upper()]
                if not matches:
                    raise ConfigError(f"environment variable {var}: [{sec}] has no key {keyu.lower()!r}")
                raw.setdefault(sec, {})[matches[0]] = val
                break
        else:
            raise ConfigError(f"environment variable {var} does not name a config section")
    return raw


def parse_config_text(text: str, path=None, environ=None) -> RunConfig:
    raw = apply_env(_read_raw(text, path), environ)
    return materialize(raw, path, text)


def parse_config(path, environ=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    return parse_config_text(text, path, environ)


def serialize_dict(cfg: RunConfig) -> dict[str, dict[str, str]]:
    return {sec: {k: _to_text(v) for k, v in vals.items()} for sec, vals in cfg.sections.items()}


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for sec, vals in serialize_dict(cfg).items():
        lines.append(f"[{sec}]")
        lines += [f"{k} = {v}" for k, v in vals.items()]
        lines.append("")
    return "\n".join(lines)
