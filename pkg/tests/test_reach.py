import math

import numpy as np
import pytest

from ctstl.lindyn import FlowExpansion, expand_along_flow, propagate_dense
from ctstl.reach import (BoundConfigurationError, lipschitz_bound, lipschitz_constant,
                         taylor_bound, taylor_piece, taylor_value, witness_times)

from helpers import random_expansion


def test_taylor_examples():
    piece = taylor_piece(1.0, 1, 1.0)
    assert piece.bound(-1.0, 0.5) == pytest.approx(-math.e * 0.5)
    assert piece.bound(-1.0, 0.5) == pytest.approx(-1.359, abs=5e-4)
    assert -0.5 * math.exp(0.5) == pytest.approx(-0.824, abs=5e-4)
    piece = taylor_piece(-1.0, 0, 3.0)
    ts = np.linspace(0, 3, 301)
    assert np.allclose(piece.bound(1.0, ts), 1 - ts)
    assert np.allclose(piece.bound(-1.0, ts), -(1 - ts + ts ** 2 / 2))
    assert np.all(piece.bound(-1.0, ts) <= -np.exp(-ts) + 1e-15)


def test_taylor_cases_are_tagged():
    assert taylor_piece(0.5, 0, 1.0).above_case == "secant"
    assert taylor_piece(0.5, 2, 1.0).below_case == "drop-exp"
    assert taylor_piece(-0.5, 1, 1.0).below_case == "taylor1"
    with pytest.raises(ValueError):
        taylor_piece(1.0, 0, 0.0)


def test_taylor_piece_soundness_random():
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(2000):
        lam, j, tau = rng.uniform(-3, 3), int(rng.integers(0, 4)), rng.uniform(0.05, 4)
        v = rng.normal() * 5
        ts = np.linspace(0, tau, 10_001)
        true = v * np.exp(lam * ts) * ts ** j
        worst = max(worst, float((taylor_piece(lam, j, tau).bound(v, ts) - true).max()))
    assert worst <= 1e-9


def test_taylor_value_bounds_expansion():
    rng = np.random.default_rng(22)
    for _ in range(300):
        exp = random_expansion(rng)
        n, m = exp.terms[0].cx.size, exp.terms[0].cu.size
        x, u = rng.normal(size=n), rng.normal(size=m)
        tau = rng.uniform(0.1, 3)
        ts = np.linspace(0, tau, 2001)
        lower = taylor_value(exp, x, u, ts)
        assert np.all(lower <= exp.evaluate(x, u, ts) + 1e-9)
        assert lower[0] == pytest.approx(float(exp.evaluate(x, u, 0.0)), abs=1e-12)
    assert len(taylor_bound(exp, 1.0)) >= 1


def test_lipschitz_double_integrator(double_integrator, di_jordan):
    exp = expand_along_flow(double_integrator, di_jordan, [1.0, 0.0])
    assert lipschitz_constant(exp, [5.0, 5.0], [10.0], 2.0) == pytest.approx(10.0)
    lf = lipschitz_bound(exp, [5.0, 5.0], [10.0], 0.4, 2.0)
    assert np.allclose(lf.wx, [1.0, 0.4]) and np.allclose(lf.wu, [0.0])
    assert lf.const == pytest.approx(-5.0 * 0.16)
    # tight against u = +10 ... and sound for u = -10
    tr = propagate_dense(double_integrator, di_jordan, [1.0, -2.0], [0.0, 2.0], [[-10.0]], 0.01)
    for t, x in zip(tr.times, tr.states):
        lf = lipschitz_bound(exp, [5.0, 5.0], [10.0], t, 2.0)
        assert lf([1.0, -2.0], [-10.0]) <= x[0] + 1e-12
        assert lf([1.0, -2.0], [-10.0]) == pytest.approx(x[0], abs=1e-9)


def test_lipschitz_constant_predicate_and_origin():
    exp = FlowExpansion(1.5, ())
    lf = lipschitz_bound(exp, [1.0], [1.0], 0.3, 1.0)
    assert lf.const == 1.5 and not np.any(lf.wx)
    rng = np.random.default_rng(23)
    exp = random_expansion(rng, n=2, m=1)
    x, u = rng.normal(size=2), rng.normal(size=1)
    lf = lipschitz_bound(exp, [3.0, 3.0], [3.0], 0.0, 1.0)
    assert lf(x, u) == pytest.approx(float(exp.evaluate(x, u, 0.0)), abs=1e-12)


def test_lipschitz_requires_boxes_and_valid_time(double_integrator, di_jordan):
    exp = expand_along_flow(double_integrator, di_jordan, [1.0, 0.0])
    with pytest.raises(BoundConfigurationError):
        lipschitz_bound(exp, None, [1.0], 0.1, 1.0)
    with pytest.raises(ValueError):
        lipschitz_bound(exp, [1.0, 1.0], [1.0], 2.0, 1.0)


def test_lipschitz_monotone_in_boxes():
    rng = np.random.default_rng(24)
    for _ in range(200):
        exp = random_expansion(rng, n=2, m=2)
        x, u = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        t, tau = rng.uniform(0, 1), 1.0
        small = lipschitz_bound(exp, [1.0, 1.0], [1.0, 1.0], t, tau)(x, u)
        big = lipschitz_bound(exp, [2.0, 1.5], [1.0, 3.0], t, tau)(x, u)
        assert big <= small + 1e-12


def test_lipschitz_soundness_random():
    rng = np.random.default_rng(25)
    for _ in range(300):
        exp = random_expansion(rng, n=2, m=1)
        xm, um = rng.uniform(0.5, 2, 2), rng.uniform(0.5, 2, 1)
        x, u = rng.uniform(-xm, xm), rng.uniform(-um, um)
        tau = rng.uniform(0.1, 2)
        ts = np.linspace(0, tau, 501)
        true = exp.evaluate(x, u, ts)
        low = np.array([lipschitz_bound(exp, xm, um, t, tau)(x, u) for t in ts])
        assert np.all(low <= true + 1e-9)


def test_witness_times_examples():
    assert witness_times((0, 1), (0, 1), 2) == [0.0, 1.0]
    assert witness_times((2, 4.5), (2, 4.5), 1) == [2.0]
    assert witness_times((0.5, 3), (0, 1), 2) == [0.5, 1.0]
    assert witness_times((3, 4), (0, 1), 2) == []
    assert witness_times((0, 1), (0, 1), 3) == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        witness_times((0, 1), (0, 1), 0)
