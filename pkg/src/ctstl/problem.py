"""TOML problem files.

Example::

    A = [[0.0, 1.0], [0.0, 0.0]]
    B = [[0.0], [1.0]]
    x0 = [0.0, 0.0]
    formula = "F[0,1](x1 >= 3) & F[2,4.5](x1 <= -2)"
    instants = [0.0, 1.0, 2.0, 4.5]   # optional initial active instants

    [options]
    u_lower = -10.0        # scalar or one value per input
    u_upper = 10.0
    ecbf_gains = [10.0]    # default gains (one value is broadcast)
    N_max = 65

    [options.gains]        # per-predicate gains, keyed by predicate text
    "x1 >= 0" = [30.0, 30.0]

    [jordan]               # optional user Jordan form of A
    V = [[1.0, 0.0], [0.0, 1.0]]
    blocks = [[0.0, 2]]    # (eigenvalue, block size)

Unknown keys are rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .encode import EncodingOptions
from .lindyn import JordanForm, LinearSystem, check_jordan, jordan_decompose
from .monitor import DEFAULT_DELTA, DEFAULT_EPS
from .plan import PlanProblem
from .stl import Formula, parse_formula, parse_predicate

TOP_KEYS = {"A", "B", "x0", "formula", "instants", "options", "jordan"}
OPTION_KEYS = {"u_lower", "u_upper", "big_M", "ecbf_gains", "gains", "method", "witness_density",
               "cost", "x_max", "u_max", "sign_encoding", "continuous", "N_max", "max_iters",
               "delta", "eps"}
JORDAN_KEYS = {"V", "blocks"}


class ProblemFileError(ValueError):
    """The problem file is malformed."""


@dataclass
class ProblemSpec:
    problem: PlanProblem
    instants: Optional[np.ndarray]
    delta: float
    eps: float

    @property
    def system(self) -> LinearSystem:
        return self.problem.system

    @property
    def formula(self) -> Formula:
        return self.problem.formula


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ProblemFileError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _matrix(value, name: str) -> np.ndarray:
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{name} must be a numeric matrix") from exc
    if M.ndim != 2:
        raise ProblemFileError(f"{name} must be a list of rows")
    return M


def _vector(value, name: str, size: Optional[int] = None) -> np.ndarray:
    try:
        v = np.atleast_1d(np.array(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{name} must be numeric") from exc
    if v.ndim != 1 or (size is not None and v.size not in (1, size)):
        raise ProblemFileError(f"{name} must have {size} entries")
    return v if size is None or v.size == size else np.full(size, v[0])


def parse_problem(data: dict) -> ProblemSpec:
    """Build a :class:`ProblemSpec` from parsed TOML data."""
    _reject_unknown(data, TOP_KEYS, "the problem file")
    for key in ("A", "B", "x0", "formula"):
        if key not in data:
            raise ProblemFileError(f"missing required key {key!r}")
    try:
        system = LinearSystem(_matrix(data["A"], "A"), _matrix(data["B"], "B"))
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc
    n, m = system.n, system.m
    x0 = _vector(data["x0"], "x0")
    if x0.size != n:
        raise ProblemFileError(f"x0 has {x0.size} entries, the state dimension is {n}")
    if not isinstance(data["formula"], str):
        raise ProblemFileError("formula must be a string")
    formula = parse_formula(data["formula"], n)

    opts = dict(data.get("options", {}))
    _reject_unknown(opts, OPTION_KEYS, "[options]")
    kw = {}
    for key in ("u_lower", "u_upper"):
        if key in opts:
            kw[key] = tuple(_vector(opts[key], key, m))
    for key in ("x_max", "u_max"):
        if key in opts:
            kw[key] = tuple(_vector(opts[key], key, n if key == "x_max" else m))
    if "ecbf_gains" in opts:
        kw["ecbf_gains"] = tuple(_vector(opts["ecbf_gains"], "ecbf_gains"))
    if "gains" in opts:
        if not isinstance(opts["gains"], dict):
            raise ProblemFileError("[options.gains] must be a table")
        kw["gains"] = {parse_predicate(k, n): tuple(_vector(v, f"gains[{k!r}]"))
                       for k, v in opts["gains"].items()}
    for key, typ in (("big_M", float), ("method", str), ("witness_density", int), ("cost", str),
                     ("sign_encoding", str), ("continuous", bool)):
        if key in opts:
            if typ is float and isinstance(opts[key], int) and not isinstance(opts[key], bool):
                opts[key] = float(opts[key])
            if not isinstance(opts[key], typ) or (typ is int and isinstance(opts[key], bool)):
                raise ProblemFileError(f"option {key} must be of type {typ.__name__}")
            kw[key] = opts[key]
    options = EncodingOptions(**kw)
    try:
        options.validate(n, m)
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from exc

    jf = None
    if "jordan" in data:
        jt = data["jordan"]
        _reject_unknown(jt, JORDAN_KEYS, "[jordan]")
        if set(jt) != JORDAN_KEYS:
            raise ProblemFileError("[jordan] needs both V and blocks")
        try:
            jf = JordanForm(_matrix(jt["V"], "jordan.V"), tuple(tuple(b) for b in jt["blocks"]))
            check_jordan(system, jf)
        except (ValueError, TypeError, np.linalg.LinAlgError) as exc:
            raise ProblemFileError(f"invalid Jordan form: {exc}") from exc
    else:
        jf = jordan_decompose(system)

    N_max = int(opts.get("N_max", 65))
    max_iters = int(opts.get("max_iters", 32))
    if N_max < 2 or max_iters < 1:
        raise ProblemFileError("N_max must be at least 2 and max_iters at least 1")
    delta = float(opts.get("delta", DEFAULT_DELTA))
    eps = float(opts.get("eps", DEFAULT_EPS))
    if not (delta > 0 and math.isfinite(delta)) or not eps >= 0:
        raise ProblemFileError("delta must be positive and eps nonnegative")
    instants = None
    if "instants" in data:
        instants = _vector(data["instants"], "instants")
    problem = PlanProblem(system, x0, formula, options, jf, N_max=N_max, max_iters=max_iters)
    return ProblemSpec(problem, instants, delta, eps)


def load_problem(path) -> ProblemSpec:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ProblemFileError(f"{path}: {exc}") from exc
    return parse_problem(data)
