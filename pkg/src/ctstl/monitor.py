"""Dense-grid space robustness: an independent check of continuous satisfaction.

Robustness is computed bottom-up as a signal over the whole sample grid:
predicates are evaluated at every sample, boolean connectives combine
samples pointwise and ``F``/``G`` take sliding-window max/min.  Windows are
snapped outward to grid points, which is conservative for ``G`` and
permissive for ``F`` by at most one sample spacing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .lindyn import JordanForm, LinearSystem, propagate_dense
from .stl import (TIME_TOL, Always, And, Eventually, FalseF, Formula, Not, Or, Pred, TrueF,
                  Until, horizon, initial_instants)

DEFAULT_DELTA = 1e-3
DEFAULT_EPS = 1e-6


class CoverageError(ValueError):
    """The signal does not cover the window the formula needs."""


@dataclass
class SampledSignal:
    times: np.ndarray
    states: np.ndarray
    delta: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("times must be a non-empty vector")
        if self.states.shape[0] != self.times.size:
            raise ValueError("one state per sample is required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def _windows(times: np.ndarray, a: float, b: float):
    """Outward-snapped index windows ``[lo_i, hi_i]`` of ``[t_i + a, t_i + b]``."""
    lo = np.searchsorted(times, times + a + TIME_TOL, side="right") - 1
    hi = np.searchsorted(times, times + b - TIME_TOL, side="left")
    last = times.size - 1
    lo = np.clip(lo, 0, last).astype(np.intp)
    hi = np.clip(hi, 0, last).astype(np.intp)
    hi = np.maximum(hi, lo)
    return lo, hi


def robustness_signal(sig: SampledSignal, f: Formula) -> np.ndarray:
    """``rho(f, t_i)`` for every sample ``t_i``.

    Entries whose windows run past the end of the signal are computed on the
    clipped window and carry no meaning; :func:`robustness` guards them.
    """
    t = sig.times
    if isinstance(f, TrueF):
        return np.full(t.size, math.inf)
    if isinstance(f, FalseF):
        return np.full(t.size, -math.inf)
    if isinstance(f, Pred):
        if f.pred.n != sig.states.shape[1]:
            raise ValueError("predicate dimension does not match the signal")
        return f.pred.value(sig.states)
    if isinstance(f, Not):
        return -robustness_signal(sig, f.child)
    if isinstance(f, And):
        return np.min([robustness_signal(sig, c) for c in f.children], axis=0)
    if isinstance(f, Or):
        return np.max([robustness_signal(sig, c) for c in f.children], axis=0)
    if isinstance(f, (Eventually, Always)):
        child = np.ascontiguousarray(robustness_signal(sig, f.child))
        lo, hi = _windows(t, f.a, f.b)
        if isinstance(f, Eventually):
            return kernels.window_max(child, lo, hi)
        return kernels.window_min(child, lo, hi)
    if isinstance(f, Until):
        left = robustness_signal(sig, f.left)
        right = robustness_signal(sig, f.right)
        lo, hi = _windows(t, f.a, f.b)
        out = np.empty(t.size)
        for i in range(t.size):
            prefix = np.minimum.accumulate(left[i:hi[i] + 1])
            seg = slice(lo[i] - i, hi[i] - i + 1)
            out[i] = np.max(np.minimum(right[lo[i]:hi[i] + 1], prefix[seg]))
        return out
    raise TypeError(f"not a formula node: {f!r}")


def robustness(sig: SampledSignal, f: Formula, t: float = 0.0) -> float:
    """Space robustness of ``f`` at sample time ``t``."""
    if t < sig.times[0] - TIME_TOL or t + horizon(f) > sig.t_end + TIME_TOL:
        raise CoverageError(f"formula needs [{t}, {t + horizon(f)}] but the signal covers "
                            f"[{sig.times[0]}, {sig.t_end}]")
    i = int(np.argmin(np.abs(sig.times - t)))
    if abs(sig.times[i] - t) > TIME_TOL:
        raise CoverageError(f"time {t} is not a sample of the signal")
    return float(robustness_signal(sig, f)[i])


@dataclass
class Verification:
    satisfied: bool
    margin: float
    signal: SampledSignal


def sample_plan(sys: LinearSystem, jf: JordanForm, x0, instants, controls, f: Formula,
                delta: float = DEFAULT_DELTA) -> SampledSignal:
    """Exact hold trajectory on a ``delta`` grid plus instants and window endpoints."""
    extra = initial_instants(f)
    traj = propagate_dense(sys, jf, x0, instants, controls, delta, extra)
    return SampledSignal(traj.times, traj.states, delta)


def verify(sys: LinearSystem, jf: JordanForm, x0, instants, controls, f: Formula,
           delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS) -> Verification:
    """Propagate the plan densely and check ``rho(f, 0) >= -eps``."""
    sig = sample_plan(sys, jf, x0, instants, controls, f, delta)
    margin = robustness(sig, f, 0.0)
    return Verification(margin >= -eps, margin, sig)


def verify_plan(result, sys: LinearSystem, jf: JordanForm, f: Formula,
                delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS) -> Verification:
    """:func:`verify` for a feasible :class:`~ctstl.plan.PlanResult`."""
    if not result.feasible:
        raise ValueError("the plan is not feasible; nothing to verify")
    return verify(sys, jf, result.states[0], result.instants, result.controls, f, delta, eps)


def load_signal_csv(path, n: Optional[int] = None) -> SampledSignal:
    """Read ``t, x1..xn`` columns (extra columns such as ``u1`` or ``h`` are ignored).

    With a header row the columns are picked by name; without one the first
    column is time and the next ``n`` (default: all) are states.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: no data")
    header = None
    try:
        float(rows[0][0])
    except ValueError:
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    data = np.array([[float(v) for v in r] for r in rows], dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError(f"{path}: no data rows")
    if header is not None:
        if "t" not in header:
            raise ValueError(f"{path}: header has no 't' column")
        xcols = []
        k = 1
        while f"x{k}" in header and (n is None or k <= n):
            xcols.append(header.index(f"x{k}"))
            k += 1
        if not xcols or (n is not None and len(xcols) != n):
            raise ValueError(f"{path}: state columns x1..xn not found")
        times, states = data[:, header.index("t")], data[:, xcols]
    else:
        times = data[:, 0]
        states = data[:, 1:] if n is None else data[:, 1:1 + n]
    delta = float(np.max(np.diff(times))) if times.size > 1 else 0.0
    return SampledSignal(times, states, delta)
