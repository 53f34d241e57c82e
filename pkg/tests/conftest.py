"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest

from ctstl.lindyn import LinearSystem, jordan_decompose
from ctstl.stl import Always, And, Eventually, FalseF, Not, Or, Pred, TrueF, Until

TOL = 1e-9


@pytest.fixture
def double_integrator():
    return LinearSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))


@pytest.fixture
def di_jordan(double_integrator):
    return jordan_decompose(double_integrator)


@pytest.fixture
def two_di():
    A = np.zeros((4, 4))
    A[0, 1] = A[2, 3] = 1.0
    B = np.zeros((4, 2))
    B[1, 0] = B[3, 1] = 1.0
    return LinearSystem(A, B)


def brute_eval(f, times, states, i, tol=0.0):
    """Boolean satisfaction at sample ``i`` by direct recursion over samples.

    Windows include every sample whose time lies in ``[t_i + a, t_i + b]``.
    A predicate holds when its value is ``>= -tol`` (use ``tol > 0`` only on
    negation-free formulas, to absorb solver round-off).
    """
    t = times[i]
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Pred):
        return float(np.dot(f.pred.nu, states[i]) + f.pred.gamma) >= -tol
    if isinstance(f, Not):
        return not brute_eval(f.child, times, states, i, tol)
    if isinstance(f, And):
        return all(brute_eval(c, times, states, i, tol) for c in f.children)
    if isinstance(f, Or):
        return any(brute_eval(c, times, states, i, tol) for c in f.children)
    win = [k for k in range(len(times)) if t + f.a - TOL <= times[k] <= t + f.b + TOL]
    if isinstance(f, Eventually):
        return any(brute_eval(f.child, times, states, k, tol) for k in win)
    if isinstance(f, Always):
        return all(brute_eval(f.child, times, states, k, tol) for k in win)
    if isinstance(f, Until):
        for k in win:
            if brute_eval(f.right, times, states, k, tol) and all(
                    brute_eval(f.left, times, states, q, tol) for q in range(i, k + 1)):
                return True
        return False
    raise TypeError(f)


def rk4(A, B, x0, instants, controls, dt=1e-5):
    """Fixed-step RK4 integration of the hold trajectory, returning states at the instants."""
    x = np.asarray(x0, float).copy()
    out = [x.copy()]
    for k in range(len(instants) - 1):
        u = np.asarray(controls[k], float)
        T = instants[k + 1] - instants[k]
        steps = max(1, int(round(T / dt)))
        h = T / steps
        f = lambda z: A @ z + B @ u  # noqa: E731
        for _ in range(steps):
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(x.copy())
    return np.array(out)


def pytest_terminal_summary(terminalreporter):
    """Print the one-line verdict of every acceptance criterion that ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
