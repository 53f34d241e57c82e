"""Continuous-time lower bounds on a predicate along a hold interval.

Two routes bound ``h(x(t)) = sigma + sum_c v_c g_c(t)`` from below with
expressions that are linear in ``(x_k, u_k)`` at any fixed ``t``:

* Lipschitz (descent lemma): ``h(0) + t h'(0) - L t^2 / 2`` with ``L`` an
  upper bound of ``|h''|`` on ``[0, tau]`` derived from state/input boxes.
* Taylor/secant: for each component a polynomial ``P(t)`` chosen by the sign
  of ``v_c`` such that ``v_c P(t) <= v_c g_c(t)`` on ``[0, tau]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .lindyn import FlowExpansion


class BoundConfigurationError(ValueError):
    """The requested bound needs information that was not supplied."""


@dataclass(frozen=True)
class LinearForm:
    """``wx.x_k + wu.u_k + const``."""

    wx: np.ndarray
    wu: np.ndarray
    const: float

    def __call__(self, x, u) -> float:
        return float(self.wx @ np.asarray(x, float) + self.wu @ np.asarray(u, float) + self.const)


def _dims(exp: FlowExpansion, n: int = 0, m: int = 0):
    if exp.terms:
        return exp.terms[0].cx.size, exp.terms[0].cu.size
    return n, m


# ------------------------------------------------------------- Lipschitz

def _g_second_envelope(lam: float, j: int, tau: float) -> float:
    """Upper bound of ``|d^2/dt^2 exp(lam t) t^j|`` on ``[0, tau]``."""
    poly = lam * lam * tau ** j
    if j >= 1:
        poly += 2.0 * abs(lam) * j * tau ** (j - 1)
    if j >= 2:
        poly += j * (j - 1) * tau ** (j - 2)
    return math.exp(max(lam, 0.0) * tau) * poly


def lipschitz_constant(exp: FlowExpansion, x_max, u_max, tau: float) -> float:
    """``L >= max_t |h''(t)|`` given ``|x_k| <= x_max`` and ``|u_k| <= u_max``."""
    if x_max is None or u_max is None:
        raise BoundConfigurationError("the Lipschitz bound needs x_max and u_max")
    x_max = np.asarray(x_max, dtype=float)
    u_max = np.asarray(u_max, dtype=float)
    if np.any(x_max < 0) or np.any(u_max < 0):
        raise BoundConfigurationError("x_max and u_max must be nonnegative")
    L = 0.0
    for term in exp.terms:
        mag = float(np.abs(term.cx) @ x_max + np.abs(term.cu) @ u_max)
        if mag:
            L += mag * _g_second_envelope(term.lam, term.j, tau)
    return L


def lipschitz_bound(exp: FlowExpansion, x_max, u_max, t: float, tau: float = None) -> LinearForm:
    """``h(0) + t h'(0) - L t^2 / 2`` as a linear form in ``(x_k, u_k)``."""
    tau = t if tau is None else tau
    if not 0 <= t <= tau + 1e-12:
        raise ValueError("t must lie in [0, tau]")
    n, m = _dims(exp, len(np.atleast_1d(x_max)), len(np.atleast_1d(u_max)))
    L = lipschitz_constant(exp, x_max, u_max, tau) if exp.terms else 0.0
    wx, wu = np.zeros(n), np.zeros(m)
    for term in exp.terms:
        g0 = 1.0 if term.j == 0 else 0.0
        d0 = term.lam if term.j == 0 else (1.0 if term.j == 1 else 0.0)
        f = g0 + t * d0
        wx = wx + f * term.cx
        wu = wu + f * term.cu
    return LinearForm(wx, wu, float(exp.sigma) - 0.5 * L * t * t)


# ---------------------------------------------------------------- Taylor

@dataclass(frozen=True)
class TaylorPiece:
    """Polynomials (ascending coefficients in ``t``) bounding ``g`` from each side.

    ``below`` satisfies ``below(t) <= g(t)`` and is used when the component
    coefficient is positive; ``above`` satisfies ``above(t) >= g(t)`` and is
    used when it is negative.
    """

    lam: float
    j: int
    tau: float
    below: np.ndarray
    above: np.ndarray
    below_case: str
    above_case: str

    def bound(self, v: float, t):
        """Lower bound of ``v exp(lam t) t^j``."""
        poly = self.below if v >= 0 else self.above
        return v * P.polyval(t, poly)

    def values(self, t: float) -> Tuple[float, float]:
        return float(P.polyval(t, self.below)), float(P.polyval(t, self.above))


def _shift(coefs, j: int) -> np.ndarray:
    return np.concatenate([np.zeros(j), np.asarray(coefs, dtype=float)])


def taylor_piece(lam: float, j: int, tau: float) -> TaylorPiece:
    """Sign-case polynomial bounds of ``g(t) = exp(lam t) t^j`` on ``[0, tau]``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    # lower envelopes (positive coefficient)
    if lam <= 0:
        below, bcase = _shift([1.0, lam], j), "taylor1"
    elif j == 0:
        below, bcase = np.array([1.0, lam, lam * lam / 2.0]), "taylor2"
    else:
        below, bcase = _shift([1.0], j), "drop-exp"
    # upper envelopes (negative coefficient)
    if lam <= 0:
        above, acase = _shift([1.0, lam, lam * lam / 2.0], j), "taylor2"
    elif j == 0:
        above, acase = np.array([1.0, (math.exp(lam * tau) - 1.0) / tau]), "secant"
    else:
        above, acase = np.array([0.0, math.exp(lam * tau) * tau ** (j - 1)]), "secant"
    return TaylorPiece(lam, j, tau, below, above, bcase, acase)


def taylor_bound(exp: FlowExpansion, tau: float) -> List[Tuple[int, str, np.ndarray, TaylorPiece]]:
    """``(term index, part, coefficient vector, piece)`` for every nonzero component."""
    out = []
    for i, term in enumerate(exp.terms):
        piece = taylor_piece(term.lam, term.j, tau)
        for part, coef in (("x", term.cx), ("u", term.cu)):
            if np.any(coef):
                out.append((i, part, np.asarray(coef, float), piece))
    return out


def taylor_value(exp: FlowExpansion, x, u, t) -> np.ndarray:
    """Evaluate the Taylor/secant lower bound of ``h`` at fixed ``(x_k, u_k)``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    tau = float(np.max(t)) if t.size else 1.0
    out = np.full(t.shape, float(exp.sigma))
    for _, part, coef, piece in taylor_bound(exp, max(tau, 1e-300)):
        v = float(coef @ (x if part == "x" else u))
        out = out + piece.bound(v, t)
    return out


# ----------------------------------------------------------- witnesses

def witness_times(window, interval, W: int = 2) -> List[float]:
    """``W`` equally spaced times in ``window`` intersected with ``interval``.

    The left end of the intersection is always included; for ``W >= 2`` the
    right end is too.  An empty intersection gives an empty list.
    """
    if W < 1:
        raise ValueError("witness density must be at least 1")
    lo = max(float(window[0]), float(interval[0]))
    hi = min(float(window[1]), float(interval[1]))
    if lo > hi + 1e-12:
        return []
    if hi - lo <= 1e-12 or W == 1:
        return [lo]
    return [lo + (hi - lo) * k / (W - 1) for k in range(W)]
