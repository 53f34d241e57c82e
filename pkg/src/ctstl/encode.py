"""Mixed-integer encoding of a continuous-time STL planning problem.

The model has one state vector per active instant (the first one is the
given initial state and enters as constants), one held input per interval,
the exact hold dynamics between instants, input bounds and an L1 objective.

Formula satisfaction is encoded recursively over (sub-formula, time) pairs.
Each encoding returns a *literal*: ``TRUE``, ``FALSE`` or the index of a
binary variable ``z`` with ``z = 1`` implying satisfaction.  When a node is
known to be required (it sits under the root through conjunctions only) its
constraints are imposed directly and no binary is created.

* Predicates at active instants and at other times use the exact flow value
  and the two-sided big-M link ``h >= -M(1 - z)``, ``h <= M z``.
* ``G`` over a boolean child is enforced on every hold interval overlapping
  its window with ECBF constraints (interval-start conditions plus the time
  minimum of ``Psi_r`` through the beta split); a disjunctive child gets one
  selector binary per disjunct and interval.
* ``F`` over a boolean child is a disjunction of the child at active instants
  in its window and of witness literals: lower bounds of the child's
  predicates at explicit witness times inside hold intervals.
* ``U`` is lowered to ``OR_t' (right at t' AND G[0, t'-t] left)`` over active
  instants ``t'`` in the window.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import cbf, reach
from .lindyn import JordanForm, LinearSystem, _flow_matrices, expand_along_flow, zoh_discretize
from .milp.model import MilpModel
from .stl import (TIME_TOL, AffinePredicate, Always, And, Eventually, FalseF, Formula, Not,
                  Or, Pred, TrueF, Until, check_dimension, dnf, horizon, is_boolean,
                  predicate_text, to_nnf)

TRUE = True
FALSE = False


class EncodingGapError(ValueError):
    """A temporal window contains no active instant and no continuous coverage."""


class BigMWarning(UserWarning):
    pass


@dataclass
class EncodingOptions:
    u_lower: Optional[Sequence[float]] = None
    u_upper: Optional[Sequence[float]] = None
    big_M: float = 1e5
    ecbf_gains: Tuple[float, ...] = (10.0,)
    gains: Dict[AffinePredicate, Tuple[float, ...]] = field(default_factory=dict)
    method: str = "taylor"
    witness_density: int = 2
    cost: str = "l1"
    x_max: Optional[Sequence[float]] = None
    u_max: Optional[Sequence[float]] = None
    sign_encoding: str = "hull"
    continuous: bool = True

    def validate(self, n: int, m: int) -> None:
        if not self.big_M > 0:
            raise ValueError("big_M must be positive")
        if self.method not in ("taylor", "lipschitz"):
            raise ValueError(f"unknown bound method {self.method!r}")
        if self.cost not in ("l1", "quadratic"):
            raise ValueError(f"unknown cost {self.cost!r}")
        if self.sign_encoding not in ("hull", "bigm"):
            raise ValueError(f"unknown sign encoding {self.sign_encoding!r}")
        if int(self.witness_density) < 1:
            raise ValueError("witness_density must be at least 1")
        lo, hi = self.input_bounds(m)
        if np.any(lo > hi):
            raise ValueError("u_lower must not exceed u_upper")
        if self.method == "lipschitz":
            if self.x_max is None or self.u_max is None:
                raise reach.BoundConfigurationError("method 'lipschitz' needs x_max and u_max")
            if len(self.x_max) != n or len(self.u_max) != m:
                raise ValueError("x_max/u_max have the wrong length")
        for k in tuple(self.ecbf_gains) + tuple(g for gs in self.gains.values() for g in gs):
            if not k > 0:
                raise ValueError("ECBF gains must be positive")

    def input_bounds(self, m: int):
        lo = np.full(m, -math.inf) if self.u_lower is None else np.broadcast_to(
            np.asarray(self.u_lower, float), (m,)).copy()
        hi = np.full(m, math.inf) if self.u_upper is None else np.broadcast_to(
            np.asarray(self.u_upper, float), (m,)).copy()
        if self.method == "lipschitz" and self.u_max is not None:
            um = np.asarray(self.u_max, float)
            lo, hi = np.maximum(lo, -um), np.minimum(hi, um)
        return lo, hi

    def gains_for(self, pred: AffinePredicate, r: int) -> cbf.EcbfSpec:
        g = tuple(self.gains.get(pred, self.ecbf_gains))
        if len(g) == 1 and r > 1:
            g = g * r
        if len(g) != r:
            raise ValueError(f"predicate {predicate_text(pred)} has relative degree {r} "
                             f"but {len(g)} ECBF gains were given")
        return cbf.EcbfSpec(g)


@dataclass
class Lin:
    """Affine expression ``sum coefs[j] * var_j + const``."""

    coefs: Dict[int, float]
    const: float = 0.0

    def scaled(self, a: float) -> "Lin":
        return Lin({j: a * v for j, v in self.coefs.items()}, a * self.const)

    def plus(self, other: "Lin", a: float = 1.0) -> "Lin":
        out = dict(self.coefs)
        for j, v in other.coefs.items():
            out[j] = out.get(j, 0.0) + a * v
        return Lin(out, self.const + a * other.const)

    def value(self, x) -> float:
        return float(sum(v * x[j] for j, v in self.coefs.items()) + self.const)


@dataclass
class VariableLayout:
    x: Dict[Tuple[int, int], int] = field(default_factory=dict)
    u: Dict[Tuple[int, int], int] = field(default_factory=dict)
    s: Dict[Tuple[int, int], int] = field(default_factory=dict)
    z: Dict[int, str] = field(default_factory=dict)
    beta: List[int] = field(default_factory=list)
    aux: List[int] = field(default_factory=list)


@dataclass
class GatedRow:
    row: int
    lin: Lin
    M: float
    global_M: bool


def _center_radius(lo: np.ndarray, hi: np.ndarray):
    """Center and radius of a box; unbounded coordinates get center 0, radius inf."""
    fin = np.isfinite(lo) & np.isfinite(hi)
    c = np.zeros(lo.shape)
    r = np.full(lo.shape, math.inf)
    c[fin] = (lo[fin] + hi[fin]) / 2
    r[fin] = (hi[fin] - lo[fin]) / 2
    return c, r


def _abs_mul(M: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``|M| r`` with ``0 * inf`` taken as 0."""
    with np.errstate(invalid="ignore"):
        prod = np.abs(M) * r[None, :]
    return np.where(M == 0.0, 0.0, prod).sum(axis=1)


class Encoder:
    """Build the MILP for ``formula`` over the given active instants."""

    def __init__(self, system: LinearSystem, jf: JordanForm, x0, formula: Formula,
                 instants: Sequence[float], options: EncodingOptions):
        self.sys, self.jf = system, jf
        self.n, self.m = system.n, system.m
        self.x0 = np.asarray(x0, dtype=float)
        if self.x0.shape != (self.n,) or not np.all(np.isfinite(self.x0)):
            raise ValueError("x0 must be a finite vector of the state dimension")
        check_dimension(formula, self.n)
        self.formula = to_nnf(formula)
        self.opt = options
        options.validate(self.n, self.m)
        inst = np.asarray(sorted(instants), dtype=float)
        if inst.size < 2 or np.any(np.diff(inst) <= TIME_TOL):
            raise ValueError("need at least two strictly increasing instants")
        if abs(inst[0]) > TIME_TOL:
            raise ValueError("the first instant must be 0")
        if inst[-1] < horizon(self.formula) - TIME_TOL:
            raise ValueError("instants must reach the formula horizon")
        self.inst = inst
        self.N = inst.size
        self.taus = np.diff(inst)
        self.steps = [zoh_discretize(system, jf, t) for t in self.taus]
        self.model = MilpModel(name="ctstl")
        self.layout = VariableLayout()
        self.gated: List[GatedRow] = []
        self.warnings: List[str] = []
        self._box_lo: List[float] = []
        self._box_hi: List[float] = []
        self._memo: dict = {}
        self._cbf_done: dict = {}
        self._flow_cache: dict = {}
        self._exp_cache: dict = {}
        self._synthetic: dict = {}
        self._count = 0
        self.counts = {"cbf_intervals": 0, "witnesses": 0}

    # ----------------------------------------------------------- variables
    def _var(self, name: str, lb=-math.inf, ub=math.inf, box=None, kind="C") -> int:
        j = self.model.add_var(name, lb, ub, kind)
        blo, bhi = box if box is not None else (lb, ub)
        self._box_lo.append(max(blo, lb))
        self._box_hi.append(min(bhi, ub))
        return j

    def _binary(self, tag: str) -> int:
        self._count += 1
        j = self._var(f"{tag}_{self._count}", 0.0, 1.0, kind="B")
        self.layout.z[j] = tag
        return j

    def _state_boxes(self):
        lo_u, hi_u = self.opt.input_bounds(self.m)
        uc, ur = _center_radius(lo_u, hi_u)
        c, r = self.x0.copy(), np.zeros(self.n)
        boxes = [(c.copy(), r.copy())]
        xm = None if self.opt.method != "lipschitz" else np.asarray(self.opt.x_max, float)
        for st in self.steps:
            c2 = st.A_k @ c + st.B_k @ uc
            r2 = _abs_mul(st.A_k, r) + _abs_mul(st.B_k, ur)
            lo, hi = c2 - r2, c2 + r2
            if xm is not None:
                lo, hi = np.maximum(lo, -xm), np.minimum(hi, xm)
            c, r = _center_radius(lo, hi)
            boxes.append((c.copy(), r.copy()))
        return boxes

    def _build_core(self) -> None:
        n, m, N = self.n, self.m, self.N
        lo_u, hi_u = self.opt.input_bounds(m)
        boxes = self._state_boxes()
        xm = None
        if self.opt.method == "lipschitz":
            xm = np.asarray(self.opt.x_max, float)
            if np.any(np.abs(self.x0) > xm):
                raise ValueError("x0 lies outside the x_max box required by the Lipschitz bound")
        for k in range(1, N):
            c, r = boxes[k]
            for i in range(n):
                lb, ub = (-xm[i], xm[i]) if xm is not None else (-math.inf, math.inf)
                self.layout.x[(k, i)] = self._var(f"x_{k}_{i}", lb, ub, (c[i] - r[i], c[i] + r[i]))
        for k in range(N - 1):
            for i in range(m):
                self.layout.u[(k, i)] = self._var(f"u_{k}_{i}", lo_u[i], hi_u[i])
        obj = {}
        for k in range(N - 1):
            for i in range(m):
                uj = self.layout.u[(k, i)]
                if self.opt.cost == "l1":
                    bound = max(abs(lo_u[i]), abs(hi_u[i]))
                    sj = self._var(f"s_{k}_{i}", 0.0, bound)
                    self.layout.s[(k, i)] = sj
                    self.model.add_constraint({sj: 1.0, uj: -1.0}, ">=", 0.0, f"abs_p_{k}_{i}")
                    self.model.add_constraint({sj: 1.0, uj: 1.0}, ">=", 0.0, f"abs_n_{k}_{i}")
                    obj[sj] = 1.0
                else:
                    self.model.quad[(uj, uj)] = 1.0
        self.model.set_objective(obj)
        for k in range(N - 1):
            st = self.steps[k]
            for i in range(n):
                lin = self._affine(k, st.A_k[i], st.B_k[i], 0.0)
                lin = lin.plus(Lin({self.layout.x[(k + 1, i)]: 1.0}), -1.0)
                self._row(lin, "=", f"dyn_{k}_{i}")

    # ---------------------------------------------------------- expressions
    def _affine(self, k: int, wx, wu, c: float) -> Lin:
        """``wx.x_k + wu.u_k + c`` (``x_0`` is the constant initial state)."""
        coefs: Dict[int, float] = {}
        const = float(c)
        wx = np.asarray(wx, float)
        if k == 0:
            const += float(wx @ self.x0)
        else:
            for i in range(self.n):
                if wx[i] != 0.0:
                    coefs[self.layout.x[(k, i)]] = float(wx[i])
        if wu is not None:
            wu = np.asarray(wu, float)
            for i in range(self.m):
                if wu[i] != 0.0:
                    if k >= self.N - 1:
                        raise ValueError("no input is held after the last instant")
                    coefs[self.layout.u[(k, i)]] = float(wu[i])
        return Lin(coefs, const)

    def _instant(self, t: float) -> Optional[int]:
        k = int(np.searchsorted(self.inst, t - TIME_TOL))
        if k < self.N and abs(self.inst[k] - t) <= TIME_TOL:
            return k
        return None

    def _interval(self, t: float) -> int:
        k = int(np.searchsorted(self.inst, t, side="right")) - 1
        return min(max(k, 0), self.N - 2)

    def _flow(self, k: int, s: float):
        key = (k, round(s, 12))
        if key not in self._flow_cache:
            Phi, Gam = _flow_matrices(self.sys, self.jf, np.array([s]))
            self._flow_cache[key] = (Phi[0], Gam[0])
        return self._flow_cache[key]

    def _pred_lin(self, pred: AffinePredicate, t: float) -> Lin:
        nu = np.asarray(pred.nu, float)
        k = self._instant(t)
        if k is not None:
            return self._affine(k, nu, None, pred.gamma)
        if t < -TIME_TOL or t > self.inst[-1] + TIME_TOL:
            raise EncodingGapError(f"time {t} lies outside the planning horizon")
        k = self._interval(t)
        Phi, Gam = self._flow(k, t - self.inst[k])
        return self._affine(k, nu @ Phi, nu @ Gam, pred.gamma)

    def _range(self, lin: Lin) -> Tuple[float, float]:
        lo = hi = lin.const
        for j, a in lin.coefs.items():
            bl, bh = self._box_lo[j], self._box_hi[j]
            if a > 0:
                lo, hi = lo + a * bl, hi + a * bh
            else:
                lo, hi = lo + a * bh, hi + a * bl
        return lo, hi

    def _bigM(self, need: float) -> Tuple[float, bool]:
        """A big-M of at least ``need`` (``inf`` -> global fallback)."""
        if not math.isfinite(need) or need * 1.01 + 1e-3 > self.opt.big_M:
            return self.opt.big_M, True
        return max(need, 0.0) * 1.01 + 1e-3, False

    # ---------------------------------------------------------------- rows
    def _row(self, lin: Lin, sense: str, name: Optional[str] = None, rhs_extra=None) -> int:
        coefs = {j: a for j, a in lin.coefs.items() if a != 0.0}
        if not coefs:
            ok = {"<=": lin.const <= 1e-9, ">=": lin.const >= -1e-9,
                  "=": abs(lin.const) <= 1e-9}[sense]
            if ok:
                return -1
            self.warnings.append(f"constant constraint {name or ''} is violated")
            # keep the contradiction visible to the solver
            anchor = self._var(f"k_{len(self.model.variables)}", 0.0, 0.0)
            coefs = {anchor: 1.0}
        return self.model.add_constraint(coefs, sense, -lin.const, name)

    def _implies(self, lit, lin: Lin, name: str, need: Optional[float] = None) -> None:
        """``lit = 1`` implies ``lin >= 0``."""
        if lit is FALSE:
            return
        if lit is TRUE:
            self._row(lin, ">=", name)
            return
        if need is None:
            need = -self._range(lin)[0]
        M, glob = self._bigM(need)
        row = self._row(lin.plus(Lin({lit: -M}, M)), ">=", name)
        if row >= 0:
            self.gated.append(GatedRow(row, lin, M, glob))

    def _not_implies(self, lit, lin: Lin, name: str) -> None:
        """``lit = 0`` implies ``lin <= 0``."""
        if lit is TRUE:
            return
        if lit is FALSE:
            self._row(lin, "<=", name)
            return
        M, glob = self._bigM(self._range(lin)[1])
        row = self._row(lin.plus(Lin({lit: -M})), "<=", name)
        if row >= 0:
            self.gated.append(GatedRow(row, lin, M, glob))

    def _require(self, lit) -> None:
        if lit is TRUE:
            return
        if lit is FALSE:
            self._row(Lin({}, -1.0), ">=", "infeasible")
            return
        self.model.variables[lit].lb = 1.0
        self._box_lo[lit] = 1.0

    def _and(self, lits, req: bool):
        if any(l is FALSE for l in lits):
            if req:
                self._require(FALSE)
            return FALSE
        lits = list(dict.fromkeys(l for l in lits if l is not TRUE))
        if req:
            for l in lits:
                self._require(l)
            return TRUE
        if not lits:
            return TRUE
        if len(lits) == 1:
            return lits[0]
        z = self._binary("za")
        for l in lits:
            self.model.add_constraint({z: 1.0, l: -1.0}, "<=", 0.0)
        self.model.add_constraint({z: 1.0, **{l: -1.0 for l in lits}}, ">=", 1.0 - len(lits))
        return z

    def _or(self, lits, req: bool):
        if any(l is TRUE for l in lits):
            return TRUE
        lits = list(dict.fromkeys(l for l in lits if l is not FALSE))
        if not lits:
            if req:
                self._require(FALSE)
            return FALSE
        if len(lits) == 1:
            if req:
                self._require(lits[0])
                return TRUE
            return lits[0]
        if req:
            self.model.add_constraint({l: 1.0 for l in lits}, ">=", 1.0)
            return TRUE
        z = self._binary("zo")
        for l in lits:
            self.model.add_constraint({z: 1.0, l: -1.0}, ">=", 0.0)
        self.model.add_constraint({z: 1.0, **{l: -1.0 for l in lits}}, "<=", 0.0)
        return z

    # ------------------------------------------------------------ formulas
    def _enc(self, f: Formula, t: float, req: bool = False):
        key = (id(f), round(t, 9))
        if not req and key in self._memo:
            return self._memo[key][1]
        if isinstance(f, TrueF):
            lit = TRUE
        elif isinstance(f, FalseF):
            lit = self._and([FALSE], req)
        elif isinstance(f, Pred):
            lit = self._enc_pred(f.pred, t, req)
        elif isinstance(f, And):
            if req:
                for c in f.children:
                    self._enc(c, t, True)
                lit = TRUE
            else:
                lit = self._and([self._enc(c, t) for c in f.children], False)
        elif isinstance(f, Or):
            lit = self._or([self._enc(c, t) for c in f.children], req)
        elif isinstance(f, Always):
            lit = self._enc_always(f, t, req)
        elif isinstance(f, Eventually):
            lit = self._enc_eventually(f, t, req)
        elif isinstance(f, Until):
            lit = self._enc_until(f, t, req)
        elif isinstance(f, Not):
            raise ValueError("formula is not in negation normal form")
        else:
            raise TypeError(f"not a formula node: {f!r}")
        if not req:
            self._memo[key] = (f, lit)
        return lit

    def _enc_pred(self, pred: AffinePredicate, t: float, req: bool):
        lin = self._pred_lin(pred, t)
        if not lin.coefs:
            ok = lin.const >= 0
            if req and not ok:
                self._require(FALSE)
            return TRUE if ok else FALSE
        if req:
            self._row(lin, ">=", f"pred_{self.model.num_constraints}")
            return TRUE
        z = self._binary("zp")
        self._implies(z, lin, f"p_on_{z}")
        self._not_implies(z, lin, f"p_off_{z}")
        return z

    def _window_instants(self, lo: float, hi: float) -> List[float]:
        sel = (self.inst >= lo - TIME_TOL) & (self.inst <= hi + TIME_TOL)
        return [float(t) for t in self.inst[sel]]

    def _window_intervals(self, lo: float, hi: float) -> List[int]:
        return [k for k in range(self.N - 1)
                if self.inst[k] < hi - TIME_TOL and self.inst[k + 1] > lo + TIME_TOL]

    def _enc_always(self, f: Always, t: float, req: bool):
        lo, hi = t + f.a, t + f.b
        if hi - lo <= TIME_TOL:
            return self._enc(f.child, lo, req)
        child = f.child
        if self.opt.continuous and is_boolean(child):
            terms = dnf(child)
            if not terms:
                return self._and([FALSE], req)
            if any(len(d) == 0 for d in terms):
                return TRUE
            gate = TRUE if req else self._binary("zg")
            for k in self._window_intervals(lo, hi):
                self.counts["cbf_intervals"] += 1
                if len(terms) == 1:
                    for p in terms[0]:
                        self._cbf(p, k, gate)
                    continue
                sels = [self._binary("zs") for _ in terms]
                row = {s: 1.0 for s in sels}
                if gate is TRUE:
                    self.model.add_constraint(row, ">=", 1.0, f"sel_{k}_{sels[0]}")
                else:
                    row[gate] = -1.0
                    self.model.add_constraint(row, ">=", 0.0, f"sel_{k}_{sels[0]}")
                for s, d in zip(sels, terms):
                    for p in d:
                        self._cbf(p, k, s)
            return gate
        times = self._window_instants(lo, hi)
        if not times:
            raise EncodingGapError(f"G window [{lo}, {hi}] contains no active instant")
        if self.opt.continuous:
            self._warn_once("G over a temporal sub-formula is enforced at active instants only")
        if req:
            for tt in times:
                self._enc(child, tt, True)
            return TRUE
        return self._and([self._enc(child, tt) for tt in times], False)

    def _enc_eventually(self, f: Eventually, t: float, req: bool):
        lo, hi = t + f.a, t + f.b
        if hi - lo <= TIME_TOL:
            return self._enc(f.child, lo, req)
        child = f.child
        lits = [self._enc(child, tt) for tt in self._window_instants(lo, hi)]
        if self.opt.continuous and is_boolean(child):
            for d in dnf(child):
                for k in self._window_intervals(lo, hi):
                    span = (self.inst[k], self.inst[k + 1])
                    for tw in reach.witness_times((lo, hi), span, self.opt.witness_density):
                        if self._instant(tw) is not None:
                            continue
                        lits.append(self._witness(d, k, tw - self.inst[k]))
        elif not is_boolean(child) and self.opt.continuous:
            self._warn_once("F over a temporal sub-formula is checked at active instants only")
        if not lits:
            raise EncodingGapError(f"F window [{lo}, {hi}] contains no active instant or witness")
        return self._or(lits, req)

    def _enc_until(self, f: Until, t: float, req: bool):
        times = self._window_instants(t + f.a, t + f.b)
        if not times:
            raise EncodingGapError(f"U window [{t + f.a}, {t + f.b}] contains no active instant")
        lits = []
        for tt in times:
            key = (id(f.left), round(tt - t, 9))
            if key not in self._synthetic:
                self._synthetic[key] = Always(0.0, max(tt - t, 0.0), f.left)
            prefix = self._synthetic[key]
            lits.append(self._and([self._enc(f.right, tt), self._enc(prefix, t)], False))
        return self._or(lits, req)

    def _warn_once(self, msg: str) -> None:
        if msg not in self.warnings:
            self.warnings.append(msg)

    # ------------------------------------------------------------------ CBF
    def _expansion(self, key, w, w0, udir):
        if key not in self._exp_cache:
            self._exp_cache[key] = expand_along_flow(self.sys, self.jf, w, w0, udir)
        return self._exp_cache[key]

    def _component_lin(self, k: int, part: str, coef) -> Lin:
        if part == "x":
            return self._affine(k, coef, None, 0.0)
        return self._affine(k, np.zeros(self.n), coef, 0.0)

    def _cbf(self, pred: AffinePredicate, k: int, gate) -> None:
        """ECBF constraints keeping ``pred`` on hold interval ``k`` when ``gate``."""
        key = (pred, k, gate)
        if key in self._cbf_done:
            return
        self._cbf_done[key] = True
        spec = self.opt.gains_for(pred, cbf.relative_degree(pred, self.sys))
        for i, (p, q) in enumerate(cbf.ecbf_chain(pred, self.sys, spec)):
            self._implies(gate, self._affine(k, p, None, q), f"cbf0_{k}_{i}_{self.model.num_constraints}")
        w, w0, udir = cbf.build_ecbf_functional(pred, self.sys, spec)
        exp = self._expansion(("cbf", pred, spec.gains), w, w0, udir)
        bounds = cbf.term_lower_bounds(exp, float(self.taus[k]))
        split = cbf.beta_split_constraints(exp, bounds)
        if not split.bounds:
            self._implies(gate, Lin({}, split.sigma), f"cbfc_{k}")
            return
        C = len(split.bounds)
        betas = []
        for c in range(C):
            b = self._var(f"b_{self.model.num_vars}")
            betas.append(b)
            self.layout.beta.append(b)
        self.model.add_constraint({b: 1.0 for b in betas}, "=", split.sigma,
                                  f"bsum_{k}_{betas[0]}")
        share = split.sigma / C
        for c, tb in enumerate(split.bounds):
            v = self._component_lin(k, tb.part, tb.coef)
            vlo, vhi = self._range(v)
            gvals = [tb.g_lo] if tb.g_hi == tb.g_lo else [tb.g_lo, tb.g_hi]
            if self.opt.sign_encoding == "bigm" and len(gvals) == 2:
                zc = self._binary("zc")
                # zc = 0 -> v >= 0 ; zc = 1 -> v <= 0
                self._implies_lit_zero(zc, v)
                # the g_lo row applies when zc = 0, the g_hi row when zc = 1
                for g, active_one in ((tb.g_lo, False), (tb.g_hi, True)):
                    lin = v.scaled(g).plus(Lin({betas[c]: 1.0}))
                    need = -min(g * vlo, g * vhi) - share
                    Ms, _ = self._bigM(abs(g) * (vhi - vlo) + abs(share))
                    relax = Lin({zc: -Ms}, Ms) if active_one else Lin({zc: Ms})
                    self._implies(gate, lin.plus(relax), f"cbfb_{k}_{betas[c]}", need + Ms)
                continue
            for g in gvals:
                lin = v.scaled(g).plus(Lin({betas[c]: 1.0}))
                need = -min(g * vlo, g * vhi) - share
                self._implies(gate, lin, f"cbfb_{k}_{betas[c]}", need)

    def _implies_lit_zero(self, zc: int, v: Lin) -> None:
        """``zc = 0`` implies ``v >= 0`` and ``zc = 1`` implies ``v <= 0``."""
        lo, hi = self._range(v)
        M1, g1 = self._bigM(-lo)
        M2, g2 = self._bigM(hi)
        r1 = self._row(v.plus(Lin({zc: M1})), ">=", f"sgn0_{zc}")
        r2 = self._row(v.plus(Lin({zc: M2}, -M2)), "<=", f"sgn1_{zc}")
        for r, M, g in ((r1, M1, g1), (r2, M2, g2)):
            if r >= 0:
                self.gated.append(GatedRow(r, v, M, g))

    # ------------------------------------------------------------ witnesses
    def _witness(self, conj: Tuple[AffinePredicate, ...], k: int, s: float):
        """Binary ``w`` with ``w = 1`` implying every predicate of ``conj`` at ``t_k + s``."""
        if not conj:
            return TRUE
        self.counts["witnesses"] += 1
        w = self._binary("zw")
        tau = float(self.taus[k])
        for pred in conj:
            nu = np.asarray(pred.nu, float)
            exp = self._expansion(("h", pred), nu, pred.gamma, None)
            if self.opt.method == "lipschitz":
                lf = reach.lipschitz_bound(exp, self.opt.x_max, self.opt.u_max, s, tau)
                lin = self._affine(k, lf.wx, lf.wu, lf.const)
                self._implies(w, lin, f"wl_{w}")
                continue
            lin = Lin({}, exp.sigma)
            floor = exp.sigma
            for _, part, coef, piece in reach.taylor_bound(exp, tau):
                v = self._component_lin(k, part, coef)
                bb, ba = piece.values(s)
                vlo, vhi = self._range(v)
                cands = [a * b for a in (bb, ba) for b in (vlo, vhi)]
                if not v.coefs:
                    val = min(bb * v.const, ba * v.const)
                    lin = lin.plus(Lin({}, val))
                    floor += val
                    continue
                if bb == ba:
                    lin = lin.plus(v.scaled(bb))
                    floor += min(bb * vlo, bb * vhi)
                    continue
                low, high = min(cands), max(cands)
                y = self._var(f"y_{self.model.num_vars}", box=(low, high))
                self.layout.aux.append(y)
                if self.opt.sign_encoding == "bigm":
                    zc = self._binary("zc")
                    self._implies_lit_zero(zc, v)
                    # y <= bb v when zc = 0 ; y <= ba v when zc = 1
                    M1, _ = self._bigM(high - min(bb * vlo, bb * vhi))
                    M2, _ = self._bigM(high - min(ba * vlo, ba * vhi))
                    self._row(v.scaled(bb).plus(Lin({y: -1.0, zc: M1})), ">=", f"wy0_{y}")
                    self._row(v.scaled(ba).plus(Lin({y: -1.0, zc: -M2}, M2)), ">=", f"wy1_{y}")
                else:
                    self._row(v.scaled(bb).plus(Lin({y: -1.0})), ">=", f"wy0_{y}")
                    self._row(v.scaled(ba).plus(Lin({y: -1.0})), ">=", f"wy1_{y}")
                lin = lin.plus(Lin({y: 1.0}))
                floor += low
            self._implies(w, lin, f"wt_{w}", -floor)
        return w

    # -------------------------------------------------------------- driver
    def build(self) -> MilpModel:
        self._build_core()
        self._enc(self.formula, 0.0, req=True)
        return self.model

    def decode(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """States at the instants (including ``x0``) and held inputs."""
        x = np.asarray(x, dtype=float)
        states = np.empty((self.N, self.n))
        states[0] = self.x0
        for (k, i), j in self.layout.x.items():
            states[k, i] = x[j]
        controls = np.empty((self.N - 1, self.m))
        for (k, i), j in self.layout.u.items():
            controls[k, i] = x[j]
        return states, controls

    def check_big_m(self, x, frac: float = 0.9) -> List[str]:
        """Warnings for gated rows using the global big-M whose expression is large."""
        out = []
        x = np.asarray(x, dtype=float)
        for g in self.gated:
            if g.global_M and abs(g.lin.value(x)) > frac * g.M:
                out.append(f"row {self.model.constraints[g.row].name}: |expression| "
                           f"{abs(g.lin.value(x)):.3g} exceeds {frac} * big_M; increase big_M")
        for msg in out:
            warnings.warn(msg, BigMWarning, stacklevel=2)
        return out


def assemble(system: LinearSystem, jf: JordanForm, x0, formula: Formula,
             instants: Sequence[float], options: EncodingOptions) -> Encoder:
    """Build the model; the returned encoder holds the model and its layout."""
    enc = Encoder(system, jf, x0, formula, instants, options)
    enc.build()
    return enc
