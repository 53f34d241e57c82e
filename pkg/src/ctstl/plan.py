"""Adaptive planning loop: encode, solve, refine the instant grid on failure."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .encode import EncodingGapError, EncodingOptions, Encoder
from .lindyn import JordanForm, LinearSystem, Trajectory, jordan_decompose, propagate_dense
from .milp import bnb
from .milp.simplex import INFEASIBLE, OPTIMAL
from .stl import Formula, horizon, initial_instants, to_nnf

FEASIBLE = "feasible"
NO_PLAN = "infeasible"
LIMIT = "limit"


def bisect_instants(instants: Sequence[float]) -> np.ndarray:
    """Insert the midpoint of every interval (``N`` -> ``2N - 1`` instants)."""
    t = np.asarray(instants, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("need at least two instants")
    out = np.empty(2 * t.size - 1)
    out[0::2] = t
    out[1::2] = 0.5 * (t[:-1] + t[1:])
    return out


@dataclass
class Attempt:
    """One encode/solve round of the loop."""

    N: int
    status: str
    variables: int = 0
    constraints: int = 0
    binaries: int = 0
    nodes: int = 0
    wall_time: float = 0.0
    objective: float = math.nan
    message: str = ""


@dataclass
class PlanResult:
    status: str
    instants: Optional[np.ndarray] = None
    states: Optional[np.ndarray] = None
    controls: Optional[np.ndarray] = None
    objective: float = math.nan
    attempts: List[Attempt] = field(default_factory=list)
    encoder: Optional[Encoder] = None
    solve_result: Optional[bnb.SolveResult] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def dense(self, sys: LinearSystem, jf: JordanForm, grid_dt: float, extra_times=None) -> Trajectory:
        if not self.feasible:
            raise ValueError("no plan to propagate")
        return propagate_dense(sys, jf, self.states[0], self.instants, self.controls,
                               grid_dt, extra_times)


@dataclass
class PlanProblem:
    system: LinearSystem
    x0: np.ndarray
    formula: Formula
    options: EncodingOptions = field(default_factory=EncodingOptions)
    jordan: Optional[JordanForm] = None
    N_max: int = 65
    max_iters: int = 32
    node_limit: int = 200000
    time_limit: float = math.inf

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.formula = to_nnf(self.formula)
        if self.jordan is None:
            self.jordan = jordan_decompose(self.system)

    def initial_instants(self) -> np.ndarray:
        t = np.asarray(initial_instants(self.formula), dtype=float)
        if t.size < 2:
            H = max(horizon(self.formula), 1.0)
            t = np.array([0.0, H])
        return t


def plan(problem: PlanProblem, instants: Optional[Sequence[float]] = None, log=None) -> PlanResult:
    """Run the refinement loop.

    Each round encodes the problem on the current instants and solves it.  A
    feasible solution ends the loop; an infeasible model or a window without
    coverage bisects every interval.  The loop stops once the next grid would
    exceed ``N_max`` instants or after ``max_iters`` rounds.
    """
    inst = problem.initial_instants() if instants is None else np.asarray(instants, float)
    result = PlanResult(NO_PLAN)
    for _ in range(problem.max_iters):
        if inst.size > problem.N_max:
            break
        att = Attempt(N=int(inst.size), status="")
        start = time.perf_counter()
        try:
            enc = Encoder(problem.system, problem.jordan, problem.x0, problem.formula,
                          inst, problem.options)
            model = enc.build()
        except EncodingGapError as exc:
            att.status, att.message = "gap", str(exc)
            att.wall_time = time.perf_counter() - start
            result.attempts.append(att)
            if log:
                log(f"N={inst.size}: {exc}; refining")
            inst = bisect_instants(inst)
            continue
        att.variables, att.constraints = model.num_vars, model.num_constraints
        att.binaries = len(model.binaries())
        sol = bnb.solve(model, node_limit=problem.node_limit, time_limit=problem.time_limit)
        att.nodes, att.wall_time = sol.nodes, time.perf_counter() - start
        att.status = sol.status
        result.attempts.append(att)
        if log:
            log(f"N={inst.size}: {sol.status} after {sol.nodes} nodes "
                f"({model.num_vars} vars, {model.num_constraints} rows)")
        if sol.status == OPTIMAL:
            att.objective = sol.objective
            states, controls = enc.decode(sol.x)
            result.status = FEASIBLE
            result.instants, result.states, result.controls = inst, states, controls
            result.objective = sol.objective
            result.encoder, result.solve_result = enc, sol
            result.warnings = list(enc.warnings) + enc.check_big_m(sol.x)
            return result
        result.encoder, result.solve_result = enc, sol
        if sol.status != INFEASIBLE:
            result.status = LIMIT
            result.warnings.append(sol.message or sol.status)
            return result
        inst = bisect_instants(inst)
    return result
