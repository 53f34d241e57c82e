"""Exponential control barrier functions for affine predicates.

For ``h(x) = nu.x + gamma`` and linear class-K maps ``alpha_i(s) = k_i s`` the
ECBF chain is ``Psi_0 = h`` and ``Psi_i = dPsi_{i-1}/dt + k_i Psi_{i-1}``.
Below the relative degree ``r`` each ``Psi_i`` is affine in the state; the
last one, ``Psi_r``, also depends on the input.  Keeping ``Psi_r >= 0`` over a
hold interval, together with ``Psi_i(x_k) >= 0`` for ``i < r`` at the interval
start, keeps ``h >= 0`` on the whole interval.

Along a hold interval ``Psi_r`` is a :class:`~ctstl.lindyn.FlowExpansion`
``sigma + sum_c v_c g_c(t)`` where ``v_c`` is linear in ``(x_k, u_k)`` and
``g_c(t) = exp(lam t) t^j >= 0``.  Its exact per-component time minimum is
``min(v_c g_lo, v_c g_hi)`` with ``g_lo``/``g_hi`` the extrema of ``g_c`` on
``[0, tau]``, which is what :func:`term_lower_bounds` provides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .lindyn import FlowExpansion, LinearSystem
from .stl import AffinePredicate

DEGREE_TOL = 1e-10


class UncontrollablePredicateError(ValueError):
    """No derivative of the predicate up to order ``n`` is actuated."""


@dataclass(frozen=True)
class EcbfSpec:
    gains: Tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(k) for k in self.gains)
        if not g:
            raise ValueError("at least one ECBF gain is required")
        if any(not (k > 0 and math.isfinite(k)) for k in g):
            raise ValueError("ECBF gains must be positive and finite")
        object.__setattr__(self, "gains", g)

    @property
    def r_b(self) -> int:
        return len(self.gains)


def relative_degree(pred: AffinePredicate, sys: LinearSystem, tol: float = DEGREE_TOL) -> int:
    """Smallest ``r`` with ``nu A^(r-1) B != 0``."""
    nu = np.asarray(pred.nu, dtype=float)
    if nu.size != sys.n:
        raise ValueError(f"predicate dimension {nu.size} != state dimension {sys.n}")
    scale = max(1.0, float(np.abs(nu).max()))
    row = nu
    for r in range(1, sys.n + 1):
        if np.abs(row @ sys.B).max() > tol * scale:
            return r
        row = row @ sys.A
        scale = max(scale, float(np.abs(row).max(initial=0.0)))
    raise UncontrollablePredicateError(
        f"predicate {pred} is not affected by the input within {sys.n} derivatives")


def ecbf_chain(pred: AffinePredicate, sys: LinearSystem, spec: EcbfSpec) -> List[Tuple[np.ndarray, float]]:
    """Affine ``(p_i, q_i)`` with ``Psi_i(x) = p_i.x + q_i`` for ``i = 0..r-1``."""
    r = relative_degree(pred, sys)
    if spec.r_b != r:
        raise ValueError(f"{spec.r_b} gains given but the relative degree is {r}")
    p = np.asarray(pred.nu, dtype=float)
    q = float(pred.gamma)
    chain = [(p.copy(), q)]
    for k in spec.gains[:-1]:
        p, q = sys.A.T @ p + k * p, k * q
        chain.append((p.copy(), q))
    return chain


def build_ecbf_functional(pred: AffinePredicate, sys: LinearSystem, spec: EcbfSpec):
    """``(w, w0, u_dir)`` with ``Psi_r(x, u) = w.x + u_dir.u + w0``."""
    chain = ecbf_chain(pred, sys, spec)
    p, q = chain[-1]
    k = spec.gains[-1]
    w = sys.A.T @ p + k * p
    return w, k * q, sys.B.T @ p


# ------------------------------------------------------------ time minima

def exp_poly_extrema(lam: float, j: int, tau: float):
    """``(g_lo, t_lo, g_hi, t_hi)`` of ``g(t) = exp(lam t) t^j`` on ``[0, tau]``.

    For ``j >= 1`` and ``lam < 0`` the maximiser is the stationary point
    ``-j/lam`` clipped to ``tau``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    g = lambda t: math.exp(lam * t) * t ** j  # noqa: E731
    if j == 0:
        e = math.exp(lam * tau)
        return (1.0, 0.0, e, tau) if lam >= 0 else (e, tau, 1.0, 0.0)
    if lam >= 0:
        return 0.0, 0.0, g(tau), tau
    ts = min(-j / lam, tau)
    return 0.0, 0.0, g(ts), ts


def term_min(v: float, lam: float, j: int, tau: float) -> Tuple[float, float]:
    """Exact ``min_{t in [0, tau]} v exp(lam t) t^j`` and a minimiser."""
    g_lo, t_lo, g_hi, t_hi = exp_poly_extrema(lam, j, tau)
    if v >= 0:
        return v * g_lo, t_lo
    return v * g_hi, t_hi


@dataclass(frozen=True)
class TermBound:
    """Time-minimum of one component ``v(x_k, u_k) g(t)`` of a flow expansion.

    ``part`` is ``"x"`` or ``"u"``; ``coef`` is the coefficient vector of
    ``v`` over that part.  ``inactive`` is the case ``v >= 0`` (minimum
    ``v g_lo``), ``active`` is ``v <= 0`` (minimum ``v g_hi``).
    """

    term: int
    part: str
    lam: float
    j: int
    coef: np.ndarray
    g_lo: float
    t_lo: float
    g_hi: float
    t_hi: float

    @property
    def tag(self) -> str:
        lam = "pos" if self.lam > 0 else ("zero" if self.lam == 0 else "neg")
        return f"lam={lam},j={self.j}"

    def value(self, v: float) -> float:
        """Minimum over time for a given component value ``v``."""
        return min(v * self.g_lo, v * self.g_hi)

    def case(self, v: float) -> str:
        return "inactive" if v >= 0 else "active"

    def argmin(self, v: float) -> float:
        return self.t_lo if v >= 0 else self.t_hi


def term_lower_bounds(exp: FlowExpansion, tau: float) -> List[TermBound]:
    """One :class:`TermBound` per nonzero ``x``/``u`` component of ``exp``."""
    out = []
    for i, term in enumerate(exp.terms):
        ext = exp_poly_extrema(term.lam, term.j, tau)
        for part, coef in (("x", term.cx), ("u", term.cu)):
            if np.any(coef):
                out.append(TermBound(i, part, term.lam, term.j, np.asarray(coef, float), *ext))
    return out


# -------------------------------------------------------------- beta split

@dataclass(frozen=True)
class BetaSplit:
    """Slack decomposition: ``sum beta = sigma`` and ``min_t zeta_c + beta_c >= 0``.

    Each component contributes the two linear rows
    ``v_c g_lo + beta_c >= 0`` and ``v_c g_hi + beta_c >= 0``, whose
    conjunction is exactly ``min_t v_c g_c(t) + beta_c >= 0``.
    """

    sigma: float
    bounds: Tuple[TermBound, ...]

    def rows(self):
        """``(component, g_value)`` pairs; each row is ``coef.z * g + beta >= 0``."""
        for c, tb in enumerate(self.bounds):
            yield c, tb.g_lo
            if tb.g_hi != tb.g_lo:
                yield c, tb.g_hi

    def component_values(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.array([tb.coef @ (x if tb.part == "x" else u) for tb in self.bounds])

    def feasible(self, x, u, tol: float = 0.0) -> bool:
        """Whether some ``beta`` satisfies all rows at fixed ``(x_k, u_k)``.

        Rows are separable, so feasibility reduces to
        ``sigma + sum_c min_t zeta_c >= 0``.
        """
        v = self.component_values(x, u)
        return self.sigma + sum(tb.value(vc) for tb, vc in zip(self.bounds, v)) >= -tol


def beta_split_constraints(exp: FlowExpansion, bounds: Sequence[TermBound]) -> BetaSplit:
    if len({(b.term, b.part) for b in bounds}) != len(bounds):
        raise ValueError("duplicate term bounds")
    covered = {(b.term, b.part) for b in bounds}
    for i, term in enumerate(exp.terms):
        for part, coef in (("x", term.cx), ("u", term.cu)):
            if np.any(coef) and (i, part) not in covered:
                raise ValueError(f"term {i}{part} has no bound")
    return BetaSplit(float(exp.sigma), tuple(bounds))


def pointwise_beta(exp: FlowExpansion, x, u, t: float) -> np.ndarray:
    """Time-dependent slacks splitting the excess of ``zeta(t)`` evenly.

    With ``delta = sum_c zeta_c(t)`` and ``C`` components,
    ``beta_c = -zeta_c(t) + (delta + sigma) / C`` sums to ``sigma`` and gives
    ``zeta_c(t) + beta_c = zeta(t) / C``, nonnegative whenever ``zeta(t)`` is.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    zeta = []
    for term in exp.terms:
        g = math.exp(term.lam * t) * t ** term.j
        for part, coef in (("x", term.cx), ("u", term.cu)):
            if np.any(coef):
                zeta.append((coef @ (x if part == "x" else u)) * g)
    zeta = np.array(zeta)
    if zeta.size == 0:
        return zeta
    delta = zeta.sum()
    return -zeta + (delta + exp.sigma) / zeta.size
