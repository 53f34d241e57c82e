"""Dense bounded-variable simplex method.

The LP is ``min c.x  s.t.  A x (<=,=,>=) b,  lb <= x <= ub`` with possibly
infinite bounds.  Each row receives a slack so that the working system is
``[A | I] z = b`` with the slack bounds encoding the sense.  The tableau
``B^-1 [A | I | art]`` is stored densely together with the reduced-cost row;
pivots go through :func:`ctstl.kernels.pivot`.

Phase I starts from a slack crash basis and only adds artificial columns for
rows whose slack would violate its bounds.  Dantzig pricing falls back to
Bland's rule after a run of degenerate pivots.  A dual simplex is provided
for re-optimisation after bound changes (branch-and-bound warm starts).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import kernels

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

AT_LOWER, AT_UPPER, AT_ZERO, BASIC = 0, 1, 2, 3


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    iterations: int
    certificate: Optional[np.ndarray] = None
    message: str = ""


@dataclass(frozen=True)
class BasisState:
    basis: tuple
    status: tuple


def _slack_bounds(sense: str):
    if sense == "<=":
        return 0.0, math.inf
    if sense == ">=":
        return -math.inf, 0.0
    return 0.0, 0.0


def farkas_verify(A, senses, b, lb, ub, y, tol: float = 1e-7) -> bool:
    """Check that multipliers ``y`` prove ``A x (sense) b, lb <= x <= ub`` empty.

    With ``s = b - A x`` restricted by the senses, ``y.(A x + s) = y.b`` must
    hold for any feasible point; the check computes the range of the
    left-hand side over the box and reports whether ``y.b`` falls outside it
    by more than ``tol`` (relative to the magnitudes involved).
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.size == 0 or not np.all(np.isfinite(y)):
        return False
    g = y @ A if A.size else np.zeros(len(lb))
    # round-off in y.A must not be multiplied by infinite bounds
    zero = 1e-11 * max(1.0, float(np.abs(y).max())) * max(1.0, float(np.abs(A).max(initial=0.0)))
    g = np.where(np.abs(g) <= zero, 0.0, g)
    y = np.where(np.abs(y) <= 1e-11 * max(1.0, float(np.abs(y).max())), 0.0, y)
    lo_parts, hi_parts = [], []
    for gj, l, u in zip(g, lb, ub):
        lo_parts.append(gj * (l if gj > 0 else u) if gj != 0 else 0.0)
        hi_parts.append(gj * (u if gj > 0 else l) if gj != 0 else 0.0)
    for yi, sense in zip(y, senses):
        sl, su = _slack_bounds(sense)
        lo_parts.append(yi * (sl if yi > 0 else su) if yi != 0 else 0.0)
        hi_parts.append(yi * (su if yi > 0 else sl) if yi != 0 else 0.0)
    lo = float(np.sum(lo_parts))
    hi = float(np.sum(hi_parts))
    rhs = float(y @ np.asarray(b, dtype=float))
    scale = tol * max(1.0, float(np.abs(y).max()) * max(1.0, float(np.abs(b).max(initial=0.0))))
    return rhs > hi + scale or rhs < lo - scale


class DenseSimplex:
    """Tableau simplex over a fixed constraint matrix with mutable bounds."""

    def __init__(self, c, A, senses, b, lb, ub, feas_tol: float = 1e-7,
                 pivot_tol: float = 1e-9, opt_tol: float = 1e-9,
                 max_iter: int = 100000, refactor_every: int = 200):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        self.m, self.n = len(senses), len(c)
        A = A.reshape(self.m, self.n)
        self.c = np.asarray(c, dtype=float).copy()
        self.A = A
        self.senses = list(senses)
        self.b = np.asarray(b, dtype=float).copy()
        self.feas_tol, self.pivot_tol, self.opt_tol = feas_tol, pivot_tol, opt_tol
        self.max_iter, self.refactor_every = max_iter, refactor_every
        rowmax = np.abs(A).max(axis=1, initial=0.0)
        self.rscale = np.where(rowmax > 0, 1.0 / np.where(rowmax > 0, rowmax, 1.0), 1.0)
        self.As = A * self.rscale[:, None]
        self.bs = self.b * self.rscale
        m, n = self.m, self.n
        self.M = np.hstack([self.As, np.eye(m)])
        self.L = np.empty(n + m)
        self.U = np.empty(n + m)
        self.L[:n] = np.asarray(lb, dtype=float)
        self.U[:n] = np.asarray(ub, dtype=float)
        for i, s in enumerate(self.senses):
            self.L[n + i], self.U[n + i] = _slack_bounds(s)
        self.iterations = 0
        self.T = None
        self._ready = False

    # ------------------------------------------------------------ helpers
    @property
    def ncols(self) -> int:
        return self.M.shape[1]

    def _nonbasic_value(self, j: int) -> float:
        l, u = self.L[j], self.U[j]
        if math.isfinite(l):
            return l
        if math.isfinite(u):
            return u
        return 0.0

    def _status_for(self, j: int) -> int:
        if math.isfinite(self.L[j]):
            return AT_LOWER
        if math.isfinite(self.U[j]):
            return AT_UPPER
        return AT_ZERO

    def _objective_row(self, cost: np.ndarray) -> None:
        cb = cost[self.basis]
        self.T[-1, :] = cost - cb @ self.T[:-1, :]

    def _refactor(self) -> bool:
        """Rebuild the tableau and basic values from the current basis."""
        m = self.m
        Bm = self.M[:, self.basis]
        try:
            Tm = np.linalg.solve(Bm, self.M) if m else np.zeros((0, self.ncols))
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(Tm)):
            return False
        Tm[np.abs(Tm) < 1e-14] = 0.0
        self.T = np.zeros((m + 1, self.ncols))
        self.T[:m] = Tm
        self.T[:m, self.basis] = np.eye(m)
        nb = self.status != BASIC
        rhs = self.bs - self.M[:, nb] @ self.x[nb]
        self.x[self.basis] = np.linalg.solve(Bm, rhs) if m else np.zeros(0)
        self._objective_row(self.cost)
        self._since_refactor = 0
        return True

    # -------------------------------------------------------------- solve
    def solve(self) -> LPResult:
        """Two-phase primal simplex from a slack crash basis."""
        m, n = self.m, self.n
        self.M = self.M[:, : n + m]
        self.L, self.U = self.L[: n + m], self.U[: n + m]
        if np.any(self.L > self.U + self.feas_tol):
            return self._infeasible_bounds()
        self.x = np.array([self._nonbasic_value(j) for j in range(n + m)])
        self.status = np.array([self._status_for(j) for j in range(n + m)])
        res = self.bs - self.As @ self.x[:n]
        basis = []
        art_cols, art_rows = [], []
        for i in range(m):
            sl, su = self.L[n + i], self.U[n + i]
            if sl - self.feas_tol <= res[i] <= su + self.feas_tol:
                basis.append(n + i)
                self.x[n + i] = res[i]
                self.status[n + i] = BASIC
            else:
                sv = 0.0
                self.x[n + i] = sv
                self.status[n + i] = AT_LOWER if math.isfinite(sl) and sl == sv else AT_UPPER
                if sl == su:
                    self.status[n + i] = AT_LOWER
                sign = 1.0 if res[i] - sv > 0 else -1.0
                col = np.zeros(m)
                col[i] = sign
                art_cols.append(col)
                art_rows.append(i)
                basis.append(n + m + len(art_cols) - 1)
        na = len(art_cols)
        if na:
            self.M = np.hstack([self.M, np.array(art_cols).T])
            self.L = np.concatenate([self.L, np.zeros(na)])
            self.U = np.concatenate([self.U, np.full(na, math.inf)])
            self.x = np.concatenate([self.x, np.abs(res[art_rows])])
            self.status = np.concatenate([self.status, np.full(na, BASIC)])
        self.basis = np.array(basis, dtype=np.intp)
        self.n_art = na
        cost1 = np.zeros(self.ncols)
        cost1[n + m:] = 1.0
        self.cost = cost1
        # The crash basis is diagonal with +-1 entries, so the tableau is cheap.
        self.T = np.zeros((m + 1, self.ncols))
        self.T[:m] = self.M
        for k, i in enumerate(art_rows):
            if self.M[i, n + m + k] < 0:
                self.T[i] = -self.T[i]
        self._objective_row(cost1)
        self._since_refactor = 0
        self._ready = True
        if na:
            st = self._primal()
            if st != OPTIMAL:
                return self._result(st)
            infeas = float(self.x[n + m:].sum())
            if infeas > self.feas_tol:
                y = self._phase1_duals()
                return self._result(INFEASIBLE, certificate=y)
            self._drive_out_artificials()
        return self.reoptimize_primal()

    def reoptimize_primal(self) -> LPResult:
        n, m = self.n, self.m
        if self.ncols > n + m:
            self.L[n + m:] = 0.0
            self.U[n + m:] = 0.0
        self.cost = np.zeros(self.ncols)
        self.cost[:n] = self.c
        self._objective_row(self.cost)
        st = self._primal()
        return self._result(st)

    def _phase1_duals(self) -> np.ndarray:
        m, n = self.m, self.n
        binv = self.T[:m, n: n + m]
        pi = self.cost[self.basis] @ binv
        return pi * self.rscale

    def _drive_out_artificials(self) -> None:
        n, m = self.n, self.m
        for r in range(m):
            if self.basis[r] < n + m:
                continue
            row = self.T[r, : n + m]
            cand = [j for j in np.flatnonzero(np.abs(row) > 1e-7) if self.status[j] != BASIC]
            if not cand:
                continue
            q = max(cand, key=lambda j: abs(row[j]))
            self._pivot(r, q)

    def _pivot(self, r: int, q: int) -> None:
        leaving = self.basis[r]
        kernels.pivot(self.T, r, q)
        self.basis[r] = q
        self.status[q] = BASIC
        l, u = self.L[leaving], self.U[leaving]
        v = self.x[leaving]
        if math.isfinite(l) and (not math.isfinite(u) or abs(v - l) <= abs(v - u)):
            self.status[leaving] = AT_LOWER
            self.x[leaving] = l
        elif math.isfinite(u):
            self.status[leaving] = AT_UPPER
            self.x[leaving] = u
        else:
            self.status[leaving] = AT_ZERO
            self.x[leaving] = 0.0
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= self.refactor_every:
            if not self._refactor():
                raise np.linalg.LinAlgError("basis became singular")

    # ------------------------------------------------------------- primal
    def _primal(self) -> str:
        m = self.m
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            d = self.T[-1]
            fixed = self.L >= self.U
            st = self.status
            inc = ((st == AT_LOWER) | (st == AT_ZERO)) & (d < -self.opt_tol) & ~fixed
            dec = ((st == AT_UPPER) | (st == AT_ZERO)) & (d > self.opt_tol) & ~fixed
            elig = inc | dec
            if not elig.any():
                return OPTIMAL
            cand = np.flatnonzero(elig)
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if inc[q] else -1.0
            alpha = self.T[:m, q] * direction
            xb = self.x[self.basis]
            lb, ub = self.L[self.basis], self.U[self.basis]
            theta = math.inf
            r = -1
            with np.errstate(divide="ignore", invalid="ignore"):
                pos = alpha > self.pivot_tol
                neg = alpha < -self.pivot_tol
                ratio = np.full(m, math.inf)
                ratio[pos] = np.maximum(xb[pos] - lb[pos], 0.0) / alpha[pos]
                ratio[neg] = np.maximum(ub[neg] - xb[neg], 0.0) / -alpha[neg]
            if m and np.isfinite(ratio).any():
                rmin = ratio.min()
                ties = np.flatnonzero(ratio <= rmin + 1e-12 * max(1.0, rmin))
                if bland:
                    r = int(min(ties, key=lambda i: self.basis[i]))
                else:
                    r = int(ties[np.argmax(np.abs(alpha[ties]))])
                theta = float(ratio[r])
            span = self.U[q] - self.L[q]
            if math.isfinite(span) and span <= theta:
                # bound flip, no basis change
                self.x[self.basis] = xb - span * alpha
                if st[q] == AT_LOWER:
                    self.x[q] = self.U[q]
                    st[q] = AT_UPPER
                else:
                    self.x[q] = self.L[q]
                    st[q] = AT_LOWER
                self.iterations += 1
                degenerate = 0
                continue
            if not math.isfinite(theta):
                return UNBOUNDED
            self.x[self.basis] = xb - theta * alpha
            self.x[q] = self.x[q] + direction * theta
            hit_lower = alpha[r] > 0
            leaving = self.basis[r]
            self.x[leaving] = self.L[leaving] if hit_lower else self.U[leaving]
            if theta <= 1e-12:
                degenerate += 1
                if degenerate > 50:
                    bland = True
            else:
                degenerate = 0
                bland = False
            xq = self.x[q]
            self._pivot(r, q)
            self.x[q] = xq
            self.status[leaving] = AT_LOWER if hit_lower else AT_UPPER
            if self._since_refactor == 0:
                continue

    # --------------------------------------------------------------- dual
    def set_bounds(self, j: int, lo: float, hi: float) -> None:
        """Change structural bounds; nonbasic values move with their bound."""
        self.L[j], self.U[j] = lo, hi
        if self.status[j] == BASIC:
            return
        old = self.x[j]
        st = self.status[j]
        if st == AT_UPPER and math.isfinite(hi):
            new = hi
        elif math.isfinite(lo):
            new, self.status[j] = lo, AT_LOWER
        elif math.isfinite(hi):
            new, self.status[j] = hi, AT_UPPER
        else:
            new, self.status[j] = 0.0, AT_ZERO
        if new != old:
            self.x[j] = new
            self.x[self.basis] -= self.T[: self.m, j] * (new - old)

    def _dual_feasible(self) -> bool:
        d = self.T[-1]
        fixed = self.L >= self.U
        st = self.status
        tol = 1e-7
        bad = (((st == AT_LOWER) & (d < -tol)) | ((st == AT_UPPER) & (d > tol))
               | ((st == AT_ZERO) & (np.abs(d) > tol))) & ~fixed
        return not bad.any()

    def reoptimize_dual(self) -> LPResult:
        """Dual simplex from the current (dual feasible) basis."""
        if not self._ready:
            return self.solve()
        if np.any(self.L > self.U + self.feas_tol):
            return self._infeasible_bounds()
        if not self._dual_feasible():
            return self.solve()
        m = self.m
        stall = 0
        while True:
            if self.iterations >= self.max_iter:
                return self._result(ITERATION_LIMIT)
            xb = self.x[self.basis]
            lb, ub = self.L[self.basis], self.U[self.basis]
            below = lb - xb
            above = xb - ub
            viol = np.maximum(below, above)
            if m == 0 or viol.max() <= self.feas_tol:
                break
            r = int(np.argmax(viol)) if stall < 50 else int(np.flatnonzero(viol > self.feas_tol)[0])
            up = below[r] > above[r]
            row = self.T[r]
            d = self.T[-1]
            st = self.status
            fixed = self.L >= self.U
            nonbasic = (st != BASIC) & ~fixed
            if up:
                elig = nonbasic & (((st == AT_LOWER) & (row < -self.pivot_tol))
                                   | ((st == AT_UPPER) & (row > self.pivot_tol))
                                   | ((st == AT_ZERO) & (np.abs(row) > self.pivot_tol)))
            else:
                elig = nonbasic & (((st == AT_LOWER) & (row > self.pivot_tol))
                                   | ((st == AT_UPPER) & (row < -self.pivot_tol))
                                   | ((st == AT_ZERO) & (np.abs(row) > self.pivot_tol)))
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                n = self.n
                y = self.T[r, n: n + m] * self.rscale
                return self._result(INFEASIBLE, certificate=y)
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            rmin = ratios.min()
            ties = cand[ratios <= rmin + 1e-12 * max(1.0, rmin)]
            q = int(ties[np.argmax(np.abs(row[ties]))]) if stall < 50 else int(ties[0])
            target = lb[r] if up else ub[r]
            delta = (xb[r] - target) / row[q]
            self.x[self.basis] = xb - delta * self.T[:m, q]
            self.x[q] += delta
            leaving = self.basis[r]
            self.x[leaving] = target
            stall = stall + 1 if abs(delta) <= 1e-12 else 0
            xq = self.x[q]
            self._pivot(r, q)
            self.x[q] = xq
            self.status[leaving] = AT_LOWER if up else AT_UPPER
        # clean up any residual dual infeasibility
        st = self._primal()
        return self._result(st)

    # --------------------------------------------------------- basis I/O
    def basis_state(self) -> BasisState:
        return BasisState(tuple(int(j) for j in self.basis), tuple(int(s) for s in self.status))

    def load_basis(self, state: BasisState, lb=None, ub=None) -> bool:
        """Restore a basis (e.g. a parent node's) and refactor the tableau."""
        if not self._ready or len(state.status) != self.ncols:
            return False
        if lb is not None:
            self.L[: self.n] = lb
            self.U[: self.n] = ub
        self.basis = np.array(state.basis, dtype=np.intp)
        self.status = np.array(state.status)
        self.x = np.zeros(self.ncols)
        for j in range(self.ncols):
            if self.status[j] == BASIC:
                continue
            l, u = self.L[j], self.U[j]
            s = self.status[j]
            if s == AT_UPPER and math.isfinite(u):
                self.x[j] = u
            elif math.isfinite(l):
                self.x[j], self.status[j] = l, AT_LOWER
            elif math.isfinite(u):
                self.x[j], self.status[j] = u, AT_UPPER
            else:
                self.x[j], self.status[j] = 0.0, AT_ZERO
        return self._refactor()

    # ------------------------------------------------------------ results
    def _infeasible_bounds(self) -> LPResult:
        return LPResult(INFEASIBLE, None, math.inf, self.iterations, None,
                        "variable bounds are inconsistent")

    def _result(self, status: str, certificate=None) -> LPResult:
        if status == OPTIMAL:
            x = self.x[: self.n].copy()
            x = np.minimum(np.maximum(x, self.L[: self.n]), self.U[: self.n])
            return LPResult(OPTIMAL, x, float(self.c @ x), self.iterations)
        if status == UNBOUNDED:
            return LPResult(UNBOUNDED, None, -math.inf, self.iterations)
        if status == INFEASIBLE:
            return LPResult(INFEASIBLE, None, math.inf, self.iterations, certificate)
        return LPResult(status, None, math.nan, self.iterations,
                        message="iteration limit reached")


def lp_solve(c, A, senses, b, lb, ub, **params) -> LPResult:
    """Solve an LP given as dense arrays."""
    return DenseSimplex(c, A, senses, b, lb, ub, **params).solve()


def solve_relaxation(model, **params) -> LPResult:
    """LP relaxation of a :class:`MilpModel` (binaries relaxed to ``[0, 1]``)."""
    c, A, senses, b, lb, ub, _ = model.to_arrays()
    return lp_solve(c, A, senses, b, lb, ub, **params)
