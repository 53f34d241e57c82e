"""Solver-agnostic mixed-integer linear model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

CONTINUOUS = "C"
BINARY = "B"
SENSES = ("<=", "=", ">=")


@dataclass
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf


@dataclass
class Constraint:
    name: str
    coefs: Dict[int, float]
    sense: str
    rhs: float


@dataclass
class MilpModel:
    """Variables, linear rows and a minimisation objective.

    Rows are stored sparsely as ``{variable index: coefficient}``.  An
    optional diagonal-free quadratic objective (``quad``) is carried for
    export only; the built-in solver rejects it.
    """

    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[int, float] = field(default_factory=dict)
    quad: Dict[Tuple[int, int], float] = field(default_factory=dict)
    name: str = "model"

    def __post_init__(self):
        self._by_name = {v.name: i for i, v in enumerate(self.variables)}

    # ---------------------------------------------------------------- build
    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf,
                kind: str = CONTINUOUS) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {kind!r}")
        if kind == BINARY:
            lb, ub = max(0.0, float(lb)), min(1.0, float(ub))
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub) or lb > ub:
            raise ValueError(f"invalid bounds for {name!r}: [{lb}, {ub}]")
        self.variables.append(Variable(name, kind, lb, ub))
        self._by_name[name] = len(self.variables) - 1
        return len(self.variables) - 1

    def add_binary(self, name: str) -> int:
        return self.add_var(name, 0.0, 1.0, BINARY)

    def add_constraint(self, coefs, sense: str, rhs: float,
                       name: Optional[str] = None) -> int:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError("constraint right-hand side must be finite")
        row: Dict[int, float] = {}
        items = coefs.items() if isinstance(coefs, dict) else coefs
        for j, a in items:
            j = int(j)
            if not 0 <= j < len(self.variables):
                raise IndexError(f"constraint references unknown variable {j}")
            a = float(a)
            if not math.isfinite(a):
                raise ValueError("constraint coefficients must be finite")
            if a != 0.0:
                row[j] = row.get(j, 0.0) + a
        row = {j: a for j, a in sorted(row.items()) if a != 0.0}
        if name is None:
            name = f"c{len(self.constraints)}"
        self.constraints.append(Constraint(name, row, sense, rhs))
        return len(self.constraints) - 1

    def set_objective(self, coefs) -> None:
        items = coefs.items() if isinstance(coefs, dict) else coefs
        obj: Dict[int, float] = {}
        for j, a in items:
            if float(a) != 0.0:
                obj[int(j)] = obj.get(int(j), 0.0) + float(a)
        self.objective = dict(sorted(obj.items()))

    # ---------------------------------------------------------------- query
    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def index(self, name: str) -> int:
        return self._by_name[name]

    def binaries(self) -> List[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == BINARY]

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def to_arrays(self):
        """Dense ``(c, A, senses, b, lb, ub, is_binary)``."""
        nv, nc = self.num_vars, self.num_constraints
        c = np.zeros(nv)
        for j, a in self.objective.items():
            c[j] = a
        A = np.zeros((nc, nv))
        b = np.zeros(nc)
        senses = []
        for i, con in enumerate(self.constraints):
            for j, a in con.coefs.items():
                A[i, j] = a
            b[i] = con.rhs
            senses.append(con.sense)
        lb, ub = self.bounds()
        is_bin = np.array([v.kind == BINARY for v in self.variables], dtype=bool)
        return c, A, senses, b, lb, ub, is_bin

    def activity(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([sum(a * x[j] for j, a in con.coefs.items())
                         for con in self.constraints])

    def objective_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        val = sum(a * x[j] for j, a in self.objective.items())
        val += sum(q * x[i] * x[j] for (i, j), q in self.quad.items())
        return float(val)

    def max_violation(self, x, int_tol: Optional[float] = None) -> float:
        """Largest bound, row or (optionally) integrality violation of ``x``."""
        x = np.asarray(x, dtype=float)
        lb, ub = self.bounds()
        worst = float(max(0.0, np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)))
        act = self.activity(x)
        for con, a in zip(self.constraints, act):
            if con.sense == "<=":
                worst = max(worst, a - con.rhs)
            elif con.sense == ">=":
                worst = max(worst, con.rhs - a)
            else:
                worst = max(worst, abs(a - con.rhs))
        if int_tol is not None:
            for j in self.binaries():
                worst = max(worst, abs(x[j] - round(x[j])))
        return worst

    def summary(self) -> dict:
        return {
            "variables": self.num_vars,
            "binaries": len(self.binaries()),
            "constraints": self.num_constraints,
            "nonzeros": sum(len(c.coefs) for c in self.constraints),
        }


def relaxation_bounds(model: MilpModel, fixings: Sequence[Tuple[int, float, float]] = ()):
    """Bounds of the LP relaxation with optional ``(j, lb, ub)`` overrides."""
    lb, ub = model.bounds()
    for j, lo, hi in fixings:
        lb[j], ub[j] = lo, hi
    return lb, ub
