"""STL formula trees, a small text parser and the usual structural queries.

The concrete syntax is::

    formula := term (('&' | '|') term)*
    term    := '!' term
             | 'F[' num ',' num ']' term
             | 'G[' num ',' num ']' term
             | '(' formula ('U[' num ',' num ']' formula)? ')'
             | atom
    atom    := linexpr ('>=' | '<=') num | 'true' | 'false'

``&`` binds tighter than ``|``.  Linear expressions are sums of terms such as
``x1``, ``-2.5*x3`` or ``0.5 x2`` plus optional constants.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

TIME_TOL = 1e-9


class FormulaSyntaxError(ValueError):
    """Raised for malformed formula text; ``pos`` is the character offset."""

    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} (at position {pos})")
        self.pos = pos


@dataclass(frozen=True)
class AffinePredicate:
    """``nu . x + gamma >= 0``."""

    nu: tuple
    gamma: float

    def __post_init__(self):
        if not any(c != 0.0 for c in self.nu):
            raise ValueError("predicate needs at least one nonzero coefficient")

    @property
    def n(self) -> int:
        return len(self.nu)

    def value(self, x) -> np.ndarray:
        """Evaluate ``h`` on a state (n,) or a stack of states (..., n)."""
        return np.asarray(x, dtype=float) @ np.asarray(self.nu, dtype=float) + self.gamma

    def negated(self) -> "AffinePredicate":
        return AffinePredicate(tuple(-c for c in self.nu), -self.gamma)


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Pred:
    pred: AffinePredicate


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Eventually:
    a: float
    b: float
    child: "Formula"


@dataclass(frozen=True)
class Always:
    a: float
    b: float
    child: "Formula"


@dataclass(frozen=True)
class Until:
    a: float
    b: float
    left: "Formula"
    right: "Formula"


Formula = Union[TrueF, FalseF, Pred, Not, And, Or, Eventually, Always, Until]
TEMPORAL = (Eventually, Always, Until)


def _check_interval(a: float, b: float, pos: int = 0) -> None:
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < a:
        raise FormulaSyntaxError(f"invalid time interval [{a}, {b}]", pos)


# --------------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x\d+)"
    r"|(?P<kw>true|false)"
    r"|(?P<temp>[FGU]\[)"
    r"|(?P<op>>=|<=|[&|!()\[\],+\-*]))"
)


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise FormulaSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, n: int):
        self.toks = _tokenize(text)
        self.i = 0
        self.n = n

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None, kind=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise FormulaSyntaxError(f"expected {value!r}, got {tok[1] or 'end of input'!r}", tok[2])
        if kind is not None and tok[0] != kind:
            raise FormulaSyntaxError(f"expected {kind}, got {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def number(self) -> float:
        sign = 1.0
        while self.peek()[1] in "+-" and self.peek()[0] == "op":
            if self.take()[1] == "-":
                sign = -sign
        return sign * float(self.take(kind="num")[1])

    def formula(self):
        disj = [self.conjunction()]
        while self.peek()[1] == "|":
            self.take()
            disj.append(self.conjunction())
        return disj[0] if len(disj) == 1 else Or(tuple(disj))

    def conjunction(self):
        conj = [self.term()]
        while self.peek()[1] == "&":
            self.take()
            conj.append(self.term())
        return conj[0] if len(conj) == 1 else And(tuple(conj))

    def interval(self):
        pos = self.peek()[2]
        a = self.number()
        self.take(",")
        b = self.number()
        self.take("]")
        _check_interval(a, b, pos)
        return a, b

    def term(self):
        kind, val, pos = self.peek()
        if val == "!":
            self.take()
            return Not(self.term())
        if kind == "temp" and val in ("F[", "G["):
            self.take()
            a, b = self.interval()
            child = self.term()
            return Eventually(a, b, child) if val == "F[" else Always(a, b, child)
        if val == "(":
            self.take()
            left = self.formula()
            if self.peek()[1] == "U[":
                self.take()
                a, b = self.interval()
                right = self.formula()
                self.take(")")
                return Until(a, b, left, right)
            self.take(")")
            return left
        return self.atom()

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "kw":
            self.take()
            return TrueF() if val == "true" else FalseF()
        nu, const = self.linexpr()
        op = self.peek()
        if op[1] not in (">=", "<="):
            raise FormulaSyntaxError("expected '>=' or '<='", op[2])
        self.take()
        rhs = self.number()
        if not any(c != 0.0 for c in nu):
            raise FormulaSyntaxError("predicate has no state dependence", pos)
        if op[1] == ">=":
            return Pred(AffinePredicate(tuple(nu), const - rhs))
        return Pred(AffinePredicate(tuple(-c for c in nu), rhs - const))

    def linexpr(self):
        nu = [0.0] * self.n
        const = 0.0
        first = True
        while True:
            sign = 1.0
            seen_sign = False
            while self.peek()[0] == "op" and self.peek()[1] in "+-":
                seen_sign = True
                if self.take()[1] == "-":
                    sign = -sign
            if not first and not seen_sign:
                break
            kind, val, pos = self.peek()
            if kind == "num":
                coef = float(self.take()[1])
                if self.peek()[1] == "*":
                    self.take()
                    if self.peek()[0] != "var":
                        raise FormulaSyntaxError("expected variable after '*'", self.peek()[2])
                if self.peek()[0] == "var":
                    idx = self.var_index(self.take())
                    nu[idx] += sign * coef
                else:
                    const += sign * coef
            elif kind == "var":
                nu[self.var_index(self.take())] += sign
            else:
                raise FormulaSyntaxError("expected a linear term", pos)
            first = False
            if not (self.peek()[0] == "op" and self.peek()[1] in "+-"):
                break
        return nu, const

    def var_index(self, tok) -> int:
        idx = int(tok[1][1:])
        if idx < 1 or idx > self.n:
            raise FormulaSyntaxError(f"variable {tok[1]} outside state dimension {self.n}", tok[2])
        return idx - 1


def parse_formula(text: str, n: int) -> Formula:
    """Parse formula text over states ``x1..xn``."""
    p = _Parser(text, n)
    f = p.formula()
    tok = p.peek()
    if tok[0] != "eof":
        raise FormulaSyntaxError(f"unexpected {tok[1]!r}", tok[2])
    return f


def parse_predicate(text: str, n: int) -> AffinePredicate:
    f = parse_formula(text, n)
    if not isinstance(f, Pred):
        raise FormulaSyntaxError("expected a single predicate", 0)
    return f.pred


# -------------------------------------------------------------------- printing

def _num(v: float) -> str:
    return repr(float(v))


def predicate_text(p: AffinePredicate) -> str:
    parts = []
    for i, c in enumerate(p.nu):
        if c == 0.0:
            continue
        mag = f"{_num(abs(c))}*x{i + 1}"
        if not parts:
            parts.append(mag if c > 0 else f"-{mag}")
        else:
            parts.append(f"+ {mag}" if c > 0 else f"- {mag}")
    return f"{' '.join(parts)} >= {_num(-p.gamma)}"


def to_text(f: Formula) -> str:
    """Fully parenthesised text that ``parse_formula`` maps back to ``f``."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Pred):
        return f"({predicate_text(f.pred)})"
    if isinstance(f, Not):
        return f"!{to_text(f.child)}"
    if isinstance(f, And):
        return "(" + " & ".join(to_text(c) for c in f.children) + ")"
    if isinstance(f, Or):
        return "(" + " | ".join(to_text(c) for c in f.children) + ")"
    if isinstance(f, Eventually):
        return f"F[{_num(f.a)},{_num(f.b)}]{to_text(f.child)}"
    if isinstance(f, Always):
        return f"G[{_num(f.a)},{_num(f.b)}]{to_text(f.child)}"
    if isinstance(f, Until):
        return f"({to_text(f.left)} U[{_num(f.a)},{_num(f.b)}] {to_text(f.right)})"
    raise TypeError(f"not a formula node: {f!r}")


# ------------------------------------------------------------------ transforms

def to_nnf(f: Formula) -> Formula:
    """Push negations down to predicates, flipping them into ``-h >= 0``."""
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, TrueF):
        return FalseF() if neg else f
    if isinstance(f, FalseF):
        return TrueF() if neg else f
    if isinstance(f, Pred):
        return Pred(f.pred.negated()) if neg else f
    if isinstance(f, Not):
        return _nnf(f.child, not neg)
    if isinstance(f, (And, Or)):
        kids = tuple(_nnf(c, neg) for c in f.children)
        flip = isinstance(f, And) == neg
        return Or(kids) if flip else And(kids)
    if isinstance(f, (Eventually, Always)):
        kid = _nnf(f.child, neg)
        flip = isinstance(f, Eventually) == neg
        return Always(f.a, f.b, kid) if flip else Eventually(f.a, f.b, kid)
    if isinstance(f, Until):
        if neg:
            raise ValueError("negated Until has no NNF in this grammar (no release operator)")
        return Until(f.a, f.b, _nnf(f.left, False), _nnf(f.right, False))
    raise TypeError(f"not a formula node: {f!r}")


def horizon(f: Formula) -> float:
    if isinstance(f, (TrueF, FalseF, Pred)):
        return 0.0
    if isinstance(f, Not):
        return horizon(f.child)
    if isinstance(f, (And, Or)):
        return max((horizon(c) for c in f.children), default=0.0)
    if isinstance(f, (Eventually, Always)):
        return f.b + horizon(f.child)
    if isinstance(f, Until):
        return f.b + max(horizon(f.left), horizon(f.right))
    raise TypeError(f"not a formula node: {f!r}")


def unique_times(times: Iterable[float], tol: float = TIME_TOL) -> tuple:
    """Sorted times with near-duplicates (within ``tol``) merged."""
    out: list = []
    for t in sorted(float(t) for t in times):
        if not out or t - out[-1] > tol:
            out.append(t)
    return tuple(out)


def _top_level_endpoints(f: Formula) -> Iterator[float]:
    if isinstance(f, (Not,)):
        yield from _top_level_endpoints(f.child)
    elif isinstance(f, (And, Or)):
        for c in f.children:
            yield from _top_level_endpoints(c)
    elif isinstance(f, TEMPORAL):
        yield f.a
        yield f.b


def initial_instants(f: Formula) -> tuple:
    """Active instants seeded from the endpoints of top-level temporal operators.

    Always contains 0 and the formula horizon; nested operators contribute only
    through their outer operator's endpoints.
    """
    return unique_times([0.0, horizon(f), *_top_level_endpoints(f)])


def predicates(f: Formula) -> list:
    """Distinct predicates in order of first appearance."""
    seen: dict = {}

    def walk(g):
        if isinstance(g, Pred):
            seen.setdefault(g.pred, None)
        elif isinstance(g, Not):
            walk(g.child)
        elif isinstance(g, (And, Or)):
            for c in g.children:
                walk(c)
        elif isinstance(g, (Eventually, Always)):
            walk(g.child)
        elif isinstance(g, Until):
            walk(g.left)
            walk(g.right)

    walk(f)
    return list(seen)


def is_boolean(f: Formula) -> bool:
    """True when ``f`` has no temporal operator."""
    if isinstance(f, (TrueF, FalseF, Pred)):
        return True
    if isinstance(f, Not):
        return is_boolean(f.child)
    if isinstance(f, (And, Or)):
        return all(is_boolean(c) for c in f.children)
    return False


def dnf(f: Formula, max_terms: int = 16) -> list:
    """Disjunctive normal form of a negation-free boolean formula.

    Returns a list of conjunctions, each a tuple of predicates.  An empty
    conjunction means ``true``; an empty list means ``false``.
    """
    if isinstance(f, TrueF):
        return [()]
    if isinstance(f, FalseF):
        return []
    if isinstance(f, Pred):
        return [(f.pred,)]
    if isinstance(f, Or):
        out = []
        for c in f.children:
            out.extend(dnf(c, max_terms))
        if len(out) > max_terms:
            raise ValueError("DNF too large")
        return out
    if isinstance(f, And):
        out = [()]
        for c in f.children:
            out = [p + q for p in out for q in dnf(c, max_terms)]
            if len(out) > max_terms:
                raise ValueError("DNF too large")
        return out
    raise ValueError(f"dnf needs a negation-free boolean formula, got {type(f).__name__}")


def check_dimension(f: Formula, n: int) -> None:
    for p in predicates(f):
        if p.n != n:
            raise ValueError(f"predicate dimension {p.n} does not match state dimension {n}")

