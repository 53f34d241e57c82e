"""Branch-and-bound for binary MILPs on top of :class:`DenseSimplex`.

Search order: depth-first dives (towards the rounded value of the branching
variable) with best-first backtracking from a heap of open nodes keyed by
their parent's LP bound.  Dives re-optimise the warm tableau with the dual
simplex; backtracking restores the parent's basis and refactors.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import MilpModel
from .simplex import (INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, DenseSimplex,
                      LPResult, farkas_verify)


@dataclass
class SolveResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    nodes: int
    wall_time: float
    bound: float = -math.inf
    lp_iterations: int = 0
    incumbent_history: List[float] = field(default_factory=list)
    bound_history: List[float] = field(default_factory=list)
    infeasible_leaves: int = 0
    certified_leaves: int = 0
    message: str = ""

    def assignment(self, model: MilpModel) -> dict:
        if self.x is None:
            return {}
        return {v.name: float(val) for v, val in zip(model.variables, self.x)}

    @property
    def infeasibility_certified(self) -> bool:
        """Every pruned-as-infeasible leaf carried a verified Farkas certificate."""
        return self.infeasible_leaves == self.certified_leaves


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixings: tuple = field(compare=False)
    basis: object = field(compare=False, default=None)


def _fractional(x: np.ndarray, bins: np.ndarray, int_tol: float) -> int:
    """Index of the most fractional binary (lowest index on ties), or -1."""
    if bins.size == 0:
        return -1
    frac = np.abs(x[bins] - np.round(x[bins]))
    k = int(np.argmax(frac))
    if frac[k] <= int_tol:
        return -1
    return int(bins[k])


def solve(model: MilpModel, int_tol: float = 1e-6, gap_tol: float = 1e-6,
          node_limit: int = 200000, time_limit: float = math.inf,
          feas_tol: float = 1e-7, log=None) -> SolveResult:
    """Solve ``model`` to optimality (within ``gap_tol``) or prove infeasibility."""
    if model.quad:
        raise ValueError("the built-in solver handles linear objectives only; "
                         "export the model for quadratic costs")
    start = time.perf_counter()
    c, A, senses, b, lb0, ub0, is_bin = model.to_arrays()
    bins = np.flatnonzero(is_bin)
    sim = DenseSimplex(c, A, senses, b, lb0, ub0, feas_tol=feas_tol)
    nodes = 0
    heap: List[_Node] = []
    seq = 0
    inc_x: Optional[np.ndarray] = None
    inc_obj = math.inf
    res = SolveResult("", None, math.inf, 0, 0.0)
    limit_hit = ""

    def node_bounds(fixings):
        lb, ub = lb0.copy(), ub0.copy()
        for j, v in fixings:
            lb[j] = ub[j] = v
        return lb, ub

    def fresh(fixings) -> LPResult:
        nonlocal sim
        lb, ub = node_bounds(fixings)
        sim = DenseSimplex(c, A, senses, b, lb, ub, feas_tol=feas_tol)
        return sim.solve()

    def cutoff() -> float:
        if not math.isfinite(inc_obj):
            return math.inf
        return inc_obj - gap_tol * max(1.0, abs(inc_obj))

    def polish(x: np.ndarray, fixings) -> tuple:
        """Re-solve with all binaries fixed at their rounded values."""
        fix = tuple((int(j), float(round(x[j]))) for j in bins)
        lb, ub = node_bounds(fix)
        lp = DenseSimplex(c, A, senses, b, lb, ub, feas_tol=feas_tol).solve()
        if lp.status == OPTIMAL:
            return lp.x, lp.objective
        xr = x.copy()
        xr[bins] = np.round(xr[bins])
        return xr, float(c @ xr)

    def record_bound(current: float):
        open_bounds = [nd.bound for nd in heap]
        if math.isfinite(current):
            open_bounds.append(current)
        lower = min(open_bounds) if open_bounds else inc_obj
        res.bound_history.append(min(lower, inc_obj))

    fixings: tuple = ()
    try:
        lp = sim.solve()
    except np.linalg.LinAlgError:
        lp = fresh(fixings)
    parent_bound = -math.inf
    while True:
        nodes += 1
        # ---- evaluate the node whose LP result is in ``lp``
        dive_next = None
        if lp.status == INFEASIBLE:
            res.infeasible_leaves += 1
            lb, ub = node_bounds(fixings)
            if lp.certificate is not None and farkas_verify(A, senses, b, lb, ub, lp.certificate):
                res.certified_leaves += 1
            elif lp.certificate is None and np.any(lb > ub):
                res.certified_leaves += 1
        elif lp.status == UNBOUNDED:
            if not fixings:
                res.status, res.nodes = UNBOUNDED, nodes
                res.wall_time = time.perf_counter() - start
                res.lp_iterations = sim.iterations
                return res
        elif lp.status != OPTIMAL:
            limit_hit = "LP iteration limit in a node"
        elif lp.objective < cutoff():
            j = _fractional(lp.x, bins, int_tol)
            if j < 0:
                xp, obj = polish(lp.x, fixings)
                if obj < inc_obj:
                    inc_x, inc_obj = xp, obj
                    res.incumbent_history.append(obj)
                    if log:
                        log(f"node {nodes}: incumbent {obj:.6g}")
            else:
                up = 1.0 if lp.x[j] >= 0.5 else 0.0
                seq += 1
                heapq.heappush(heap, _Node(lp.objective, seq, fixings + ((j, 1.0 - up),),
                                           sim.basis_state()))
                dive_next = (j, up, lp.objective)
        record_bound(dive_next[2] if dive_next else math.inf)
        if nodes >= node_limit:
            limit_hit = "node limit reached"
            break
        if time.perf_counter() - start > time_limit:
            limit_hit = "time limit reached"
            break
        # ---- choose the next node
        if dive_next is not None:
            j, v, parent_bound = dive_next
            fixings = fixings + ((j, v),)
            sim.set_bounds(j, v, v)
            try:
                lp = sim.reoptimize_dual()
            except np.linalg.LinAlgError:
                lp = fresh(fixings)
            if lp.status == ITERATION_LIMIT:
                lp = fresh(fixings)
            continue
        node = None
        while heap:
            cand = heapq.heappop(heap)
            if cand.bound < cutoff():
                node = cand
                break
        if node is None:
            break
        fixings = node.fixings
        parent_bound = node.bound
        lb, ub = node_bounds(fixings)
        try:
            ok = sim.load_basis(node.basis, lb, ub)
            lp = sim.reoptimize_dual() if ok else fresh(fixings)
        except np.linalg.LinAlgError:
            lp = fresh(fixings)
        if lp.status == ITERATION_LIMIT:
            lp = fresh(fixings)

    res.nodes = nodes
    res.wall_time = time.perf_counter() - start
    res.lp_iterations = sim.iterations
    if limit_hit and (heap or not math.isfinite(inc_obj)):
        res.status = ITERATION_LIMIT
        res.message = limit_hit
    elif math.isfinite(inc_obj):
        res.status = OPTIMAL
    else:
        res.status = INFEASIBLE
    if inc_x is not None:
        res.x, res.objective = inc_x, inc_obj
    open_b = [nd.bound for nd in heap]
    res.bound = min(open_b + [inc_obj]) if open_b else inc_obj
    return res
