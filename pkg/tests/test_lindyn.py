import math

import numpy as np
import pytest
from scipy.integrate import quad_vec
from scipy.linalg import expm

from ctstl.lindyn import (ConditioningError, JordanForm, LinearSystem, SpectrumError,
                          check_jordan, expand_along_flow, jordan_decompose, propagate_dense,
                          zoh_discretize)

from conftest import rk4
from helpers import random_real_spectrum_system


def expm_zoh(A, B, tau):
    """Van Loan block-exponential oracle for the hold discretisation."""
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n], M[:n, n:] = A, B
    E = expm(M * tau)
    return E[:n, :n], E[:n, n:]


def test_jordan_double_integrator(double_integrator):
    jf = jordan_decompose(double_integrator)
    assert jf.blocks == ((0.0, 2),)


def test_jordan_zero_and_diagonal():
    jf = jordan_decompose(LinearSystem(np.zeros((2, 2)), np.eye(2)))
    assert jf.blocks == ((0.0, 1), (0.0, 1))
    jf = jordan_decompose(LinearSystem(np.diag([-1.0, 2.0]), np.ones((2, 1))))
    assert sorted(jf.blocks) == [(-1.0, 1), (2.0, 1)]
    assert np.allclose(np.abs(jf.V), np.eye(2)) or np.allclose(np.abs(jf.V), np.eye(2)[::-1])


def test_jordan_rejects_complex_spectrum():
    with pytest.raises(SpectrumError):
        jordan_decompose(LinearSystem(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.ones((2, 1))))


def test_check_jordan_rejects_wrong_form(double_integrator):
    with pytest.raises(ConditioningError):
        check_jordan(double_integrator, JordanForm(np.eye(2), ((0.0, 1), (0.0, 1))))


def test_linear_system_validation():
    with pytest.raises(ValueError):
        LinearSystem(np.zeros((2, 3)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        LinearSystem(np.zeros((2, 2)), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        LinearSystem(np.array([[np.nan]]), np.ones((1, 1)))


def test_zoh_examples(double_integrator, di_jordan):
    st = zoh_discretize(double_integrator, di_jordan, 1.0)
    assert np.allclose(st.A_k, [[1, 1], [0, 1]], atol=1e-14)
    assert np.allclose(st.B_k, [[0.5], [1]], atol=1e-14)
    zero = LinearSystem(np.zeros((2, 2)), np.array([[1.0], [2.0]]))
    st = zoh_discretize(zero, jordan_decompose(zero), 0.7)
    assert np.allclose(st.A_k, np.eye(2)) and np.allclose(st.B_k, 0.7 * zero.B)
    sc = LinearSystem(np.array([[-1.0]]), np.array([[1.0]]))
    st = zoh_discretize(sc, jordan_decompose(sc), 2.0)
    assert st.A_k[0, 0] == pytest.approx(math.exp(-2), abs=1e-15)
    assert st.B_k[0, 0] == pytest.approx(1 - math.exp(-2), abs=1e-15)


def test_zoh_random_vs_expm_and_semigroup():
    rng = np.random.default_rng(7)
    for _ in range(200):
        sys = random_real_spectrum_system(rng)
        jf = jordan_decompose(sys)
        t1, t2 = rng.uniform(0.05, 1.5, 2)
        st = zoh_discretize(sys, jf, t1)
        Ak, Bk = expm_zoh(sys.A, sys.B, t1)
        assert np.abs(st.A_k - Ak).max() <= 1e-9 * max(1, np.abs(Ak).max())
        assert np.abs(st.B_k - Bk).max() <= 1e-9 * max(1, np.abs(Bk).max())
        s1, s2 = zoh_discretize(sys, jf, t1), zoh_discretize(sys, jf, t2)
        s12 = zoh_discretize(sys, jf, t1 + t2)
        assert np.allclose(s2.A_k @ s1.A_k, s12.A_k, atol=1e-9, rtol=1e-9)
        assert np.allclose(s2.A_k @ s1.B_k + s2.B_k, s12.B_k, atol=1e-9, rtol=1e-9)


def test_expand_double_integrator_position(double_integrator, di_jordan):
    exp = expand_along_flow(double_integrator, di_jordan, [1.0, 0.0])
    assert exp.sigma == 0.0
    got = {(t.lam, t.j): (tuple(t.cx), tuple(t.cu)) for t in exp.terms}
    assert got == {(0.0, 0): ((1.0, 0.0), (0.0,)), (0.0, 1): ((0.0, 1.0), (0.0,)),
                   (0.0, 2): ((0.0, 0.0), (0.5,))}


def test_expand_constant_and_scalar():
    sys = LinearSystem(np.array([[-1.0]]), np.array([[1.0]]))
    jf = jordan_decompose(sys)
    exp = expand_along_flow(sys, jf, [0.0], 2.5)
    assert exp.sigma == 2.5 and exp.terms == ()
    exp = expand_along_flow(sys, jf, [1.0])
    by = {(t.lam, t.j): t for t in exp.terms}
    assert by[(-1.0, 0)].cx[0] == pytest.approx(1.0)
    assert by[(-1.0, 0)].cu[0] == pytest.approx(-1.0)
    assert by[(0.0, 0)].cu[0] == pytest.approx(1.0)


def test_expansion_matches_expm_on_grid():
    rng = np.random.default_rng(11)
    for _ in range(60):
        sys = random_real_spectrum_system(rng)
        jf = jordan_decompose(sys)
        w = rng.normal(size=sys.n)
        uc = rng.normal(size=sys.m)
        exp = expand_along_flow(sys, jf, w, 0.3, uc, -0.1)
        x, u = rng.normal(size=sys.n), rng.normal(size=sys.m)
        ts = np.linspace(0, 1.2, 1000)
        got = exp.evaluate(x, u, ts)
        want = []
        for t in ts:
            Ak, Bk = expm_zoh(sys.A, sys.B, t) if t > 0 else (np.eye(sys.n), np.zeros_like(sys.B))
            want.append(w @ (Ak @ x + Bk @ u) + uc @ u + 0.2)
        want = np.array(want)
        assert np.abs(got - want).max() <= 1e-9 * max(1.0, np.abs(want).max())


def test_expansion_linear_at_matches_evaluate(double_integrator, di_jordan):
    exp = expand_along_flow(double_integrator, di_jordan, [1.0, 2.0], 0.5)
    wx, wu, c = exp.linear_at(0.7)
    x, u = np.array([0.3, -1.0]), np.array([2.0])
    assert wx @ x + wu @ u + c == pytest.approx(float(exp.evaluate(x, u, 0.7)), abs=1e-13)


def test_propagate_examples(double_integrator, di_jordan):
    tr = propagate_dense(double_integrator, di_jordan, [0.0, 1.0], [0.0, 2.0], [[0.0]], 0.01)
    assert np.allclose(tr.states[:, 0], tr.times, atol=1e-14)
    tr = propagate_dense(double_integrator, di_jordan, [0.0, 0.0], [0.0, 0.5, 1.0],
                         [[1.0], [-3.0]], 0.1, extra_times=[0.25])
    assert 0.25 in tr.times and 0.5 in tr.times
    # continuity at the breakpoint: compare with the left limit
    k = int(np.flatnonzero(tr.times == 0.5)[0])
    left = propagate_dense(double_integrator, di_jordan, [0.0, 0.0], [0.0, 0.5], [[1.0]], 0.5)
    assert np.allclose(tr.states[k], left.states[-1], atol=1e-14)


def test_propagate_vs_rk4():
    rng = np.random.default_rng(3)
    for _ in range(3):
        sys = random_real_spectrum_system(rng, lam_range=(-1.0, 0.3))
        jf = jordan_decompose(sys)
        inst = np.array([0.0, 0.7, 1.5, 2.0])
        U = rng.uniform(-1, 1, size=(3, sys.m))
        x0 = rng.normal(size=sys.n)
        tr = propagate_dense(sys, jf, x0, inst, U, 0.05)
        ref = rk4(sys.A, sys.B, x0, inst, U, dt=1e-4)
        idx = [int(np.argmin(np.abs(tr.times - t))) for t in inst]
        assert np.abs(tr.states[idx] - ref).max() <= 1e-8 * max(1, np.abs(ref).max())


def test_integral_oracle_for_input_matrix():
    sys = LinearSystem(np.array([[0.5, 1.0], [0.0, 0.5]]), np.array([[0.0], [1.0]]))
    jf = jordan_decompose(sys)
    assert jf.blocks == ((0.5, 2),)
    st = zoh_discretize(sys, jf, 1.3)
    want, _ = quad_vec(lambda s: expm(sys.A * s) @ sys.B, 0.0, 1.3, epsabs=1e-13)
    assert np.allclose(st.B_k, want, atol=1e-11)
