import math
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from ctstl import monitor
from ctstl.encode import BigMWarning, EncodingGapError, EncodingOptions, Encoder, assemble
from ctstl.lindyn import jordan_decompose
from ctstl.milp import INFEASIBLE, OPTIMAL, solve
from ctstl.milp.lpformat import export_model
from ctstl.stl import (AffinePredicate, Always, And, Eventually, Not, Or, Pred, Until, horizon,
                       parse_formula, to_nnf)

from conftest import brute_eval

GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"
PHI1 = "F[0,1.0](x1 >= 3) & F[2.0,4.5](x1 <= -2)"
U10 = dict(u_lower=[-10.0], u_upper=[10.0])


def build(sys, x0, text, instants, **kw):
    f = parse_formula(text, sys.n)
    enc = Encoder(sys, jordan_decompose(sys), x0, f, instants, EncodingOptions(**kw))
    return enc, enc.build()


def rows_with(model, j):
    return [c for c in model.constraints if j in c.coefs]


def test_example1_model_counts_and_golden(double_integrator):
    enc, model = build(double_integrator, [0, 0], PHI1, [0, 1, 2, 4.5], **U10)
    assert (enc.N, len(enc.layout.x), len(enc.layout.u), len(enc.layout.s)) == (4, 6, 3, 3)
    assert (model.num_vars, model.num_constraints, len(model.binaries())) == (15, 19, 3)
    assert export_model(model) == (GOLDEN / "ex1.lp").read_text()
    res = solve(model)
    assert res.status == OPTIMAL


def test_g_over_instants_table_rows(double_integrator):
    enc = Encoder(double_integrator, jordan_decompose(double_integrator), [0, 0],
                  parse_formula("true", 2), [0, 1, 2], EncodingOptions(continuous=False, **U10))
    enc._build_core()
    g = Always(1.0, 2.0, Pred(AffinePredicate((1.0, 0.0), 0.0)))
    z = enc._enc(g, 0.0)
    zr = rows_with(enc.model, z)
    kids = [j for c in zr for j in c.coefs if j != z]
    assert len(zr) == 3 and len(set(kids)) == 2
    upper = [c for c in zr if c.sense == "<="]
    lower = [c for c in zr if c.sense == ">="]
    assert len(upper) == 2 and all(c.coefs[z] == 1.0 and c.rhs == 0.0 for c in upper)
    assert lower[0].rhs == -1.0 and all(lower[0].coefs[k] == -1.0 for k in set(kids))


def test_single_instant_f_reuses_predicate_literal(double_integrator):
    enc = Encoder(double_integrator, jordan_decompose(double_integrator), [0, 0],
                  parse_formula("true", 2), [0, 1, 2], EncodingOptions(continuous=False, **U10))
    enc._build_core()
    p = Pred(AffinePredicate((1.0, 0.0), -1.0))
    assert enc._enc(Eventually(1.0, 1.0, p), 0.0) == enc._enc(p, 1.0)
    assert enc._enc(Eventually(0.5, 1.5, p), 0.0) == enc._enc(p, 1.0)


def test_negated_predicate_same_pattern(double_integrator):
    enc, model = build(double_integrator, [0, 0], "F[1,1](!(x1 >= 1)) | F[2,2](x1 >= 1)",
                       [0, 1, 2], continuous=False, **U10)
    x = solve(model).x
    states, _ = enc.decode(x)
    assert states[1, 0] <= 1 + 1e-7 or states[2, 0] >= 1 - 1e-7


def test_cbf_rows_per_interval(double_integrator):
    enc, model = build(double_integrator, [0, 0], "G[0,2](x1 <= 2)", [0, 1, 2], **U10)
    names = [c.name for c in model.constraints]
    assert enc.counts["cbf_intervals"] == 2
    assert sum(n.startswith("bsum_") for n in names) == 2
    # the chain start at t=0 is a constant (x0 is known), at t=1 it is a row
    assert sum(n.startswith("cbf0_") for n in names) >= 1
    deg1 = build(double_integrator, [0, 0], "G[0,2](x2 <= 2)", [0, 1, 2], **U10)[1]
    deg2_rows = sum(n.startswith("cbfb_") for n in names)
    assert sum(c.name.startswith("cbfb_") for c in deg1.constraints) < deg2_rows


def test_cbf_skips_intervals_outside_window(double_integrator):
    enc, model = build(double_integrator, [0, 0], "G[2,3](x2 <= 2)", [0, 1, 2, 3], **U10)
    bsum = [c.name for c in model.constraints if c.name.startswith("bsum_")]
    assert len(bsum) == 1 and bsum[0].startswith("bsum_2_")


def test_g_disjunction_selectors(two_di):
    enc, model = build(two_di, [1, 0, -0.5, 0], "G[0,1](x1 >= 0 | x3 >= 0)", [0, 0.5, 1],
                       u_lower=[-40, -40], u_upper=[40, 40], ecbf_gains=(30.0, 30.0))
    sels = [j for j, tag in enc.layout.z.items() if tag == "zs"]
    assert len(sels) == 4
    res = solve(model)
    assert res.status == OPTIMAL
    assert all(abs(res.x[j] - round(res.x[j])) < 1e-6 for j in sels)


def test_witness_shared_for_conjunction(two_di):
    enc, model = build(two_di, [0, 0, 0, 0], "F[0.2,0.8](x1 >= 0.1 & x3 >= 0.1)", [0, 1],
                       u_lower=[-40, -40], u_upper=[40, 40], witness_density=2)
    ws = [j for j, tag in enc.layout.z.items() if tag == "zw"]
    assert len(ws) == 2
    for w in ws:
        assert sum(1 for c in model.constraints if w in c.coefs and c.name.startswith("wt_")) == 2


def test_f_witness_at_interval_start_solves_example1(double_integrator):
    enc, model = build(double_integrator, [0, 0], PHI1, [0, 1, 2, 4.5], witness_density=1, **U10)
    res = solve(model)
    assert res.status == OPTIMAL
    states, controls = enc.decode(res.x)
    ver = monitor.verify(double_integrator, enc.jf, [0, 0], enc.inst, controls,
                         parse_formula(PHI1, 2))
    assert ver.satisfied


def test_empty_formula_zero_cost(double_integrator):
    enc, model = build(double_integrator, [3, -1], "true", [0, 1], **U10)
    res = solve(model)
    assert res.status == OPTIMAL and res.objective == 0.0
    assert np.allclose(enc.decode(res.x)[1], 0.0)


def test_contradiction_infeasible(double_integrator):
    enc, model = build(double_integrator, [0, 0], "F[0,0](x1 >= 1) & F[0,0](-x1 >= 1)",
                       [0, 1], **U10)
    assert solve(model).status == INFEASIBLE


def test_until_reductions(double_integrator):
    jf = jordan_decompose(double_integrator)
    p = Pred(AffinePredicate((1.0, 0.0), -1.0))
    q = Pred(AffinePredicate((0.0, 1.0), 0.0))
    for text_f, text_g in [("(true U[0,2] x1 >= 1)", "F[0,2](x1 >= 1)")]:
        for txt in (text_f, text_g):
            enc = Encoder(double_integrator, jf, [0, 0], parse_formula(txt, 2), [0, 1, 2],
                          EncodingOptions(continuous=False, **U10))
            assert solve(enc.build()).status == OPTIMAL
    # b = a: G[0,a] left and right at a
    f = Until(1.0, 1.0, q, p)
    enc = Encoder(double_integrator, jf, [0, 0], f, [0, 1, 2], EncodingOptions(**U10))
    res = solve(enc.build())
    states, controls = enc.decode(res.x)
    assert states[1, 0] >= 1 - 1e-7
    sig = monitor.sample_plan(double_integrator, jf, [0, 0], enc.inst, controls,
                              Always(0.0, 1.0, q))
    assert monitor.robustness(sig, Always(0.0, 1.0, q)) >= -1e-7


def test_gap_error_without_coverage(double_integrator):
    f = parse_formula("F[0.2,0.3](G[0,0.1](x1 >= 0))", 2)
    with pytest.raises(EncodingGapError):
        Encoder(double_integrator, jordan_decompose(double_integrator), [0, 0], f, [0, 1],
                EncodingOptions(**U10)).build()


def test_option_validation(double_integrator):
    jf = jordan_decompose(double_integrator)
    f = parse_formula(PHI1, 2)
    for bad in (dict(big_M=0.0), dict(method="exact"), dict(cost="l2"),
                dict(sign_encoding="none"), dict(witness_density=0),
                dict(u_lower=[1.0], u_upper=[0.0]), dict(ecbf_gains=(-1.0,)),
                dict(method="lipschitz")):
        with pytest.raises(ValueError):
            Encoder(double_integrator, jf, [0, 0], f, [0, 1, 2, 4.5], EncodingOptions(**bad))
    with pytest.raises(ValueError):
        Encoder(double_integrator, jf, [0, 0], f, [0, 1, 2], EncodingOptions())
    with pytest.raises(ValueError):
        Encoder(double_integrator, jf, [0, 0, 0], f, [0, 4.5], EncodingOptions())
    with pytest.raises(ValueError):
        EncodingOptions(gains={AffinePredicate((1.0, 0.0), 0.0): (1.0, 2.0, 3.0)}).gains_for(
            AffinePredicate((1.0, 0.0), 0.0), 2)


def test_quadratic_cost_export_only(double_integrator):
    enc, model = build(double_integrator, [0, 0], PHI1, [0, 1, 2, 4.5], cost="quadratic", **U10)
    assert model.quad and "^2" in export_model(model)
    with pytest.raises(ValueError):
        solve(model)


def test_big_m_warning(double_integrator):
    enc, model = build(double_integrator, [0, 0], "F[1,1](x1 >= 50) | F[1,1](x1 >= 60)",
                       [0, 1], big_M=10.0)
    res = solve(model)
    assert res.status == OPTIMAL
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        msgs = enc.check_big_m(res.x)
    assert msgs and any(issubclass(w.category, BigMWarning) for w in rec)


@pytest.mark.parametrize("kw", [dict(sign_encoding="bigm"),
                                dict(method="lipschitz", x_max=[20, 20], u_max=[10]),
                                dict(witness_density=3)])
def test_variants_verify_on_example1(double_integrator, kw):
    opts = dict(U10)
    opts.update(kw)
    enc, model = build(double_integrator, [0, 0], PHI1, [0, 1, 2, 4.5], **opts)
    res = solve(model)
    assert res.status == OPTIMAL
    _, controls = enc.decode(res.x)
    ver = monitor.verify(double_integrator, enc.jf, [0, 0], enc.inst, controls,
                         parse_formula(PHI1, 2))
    assert ver.margin >= -1e-6


def test_bigm_sign_encoding_example2(two_di):
    f = ("F[0.1,0.6](x1 <= -0.5 & x3 >= 0.5) & F[0.7,1](x1 >= 1 & x3 >= 1) "
         "& G[0,1](x1 >= 0 | x3 >= 0)")
    inst = [0, 0.05, 0.1, 0.35, 0.6, 0.65, 0.7, 0.85, 1.0]
    enc, model = build(two_di, [1, 0, -0.5, 0], f, inst, u_lower=[-40, -40], u_upper=[40, 40],
                       ecbf_gains=(30.0, 30.0), sign_encoding="bigm")
    res = solve(model)
    assert res.status == OPTIMAL
    _, controls = enc.decode(res.x)
    ver = monitor.verify(two_di, enc.jf, [1, 0, -0.5, 0], enc.inst, controls,
                         parse_formula(f, 4))
    assert ver.margin >= -1e-6


# ------------------------------------------------------------- properties

def _formulas(temporal_child_boolean=False):
    preds = st.builds(lambda a, b, g: Pred(AffinePredicate((a, b), g)),
                      st.sampled_from([-1.0, 1.0, 0.5]), st.sampled_from([0.0, 1.0, -0.5]),
                      st.sampled_from([-1.0, 0.0, 0.5, 1.0]).filter(lambda v: True))
    preds = preds.filter(lambda p: any(p.pred.nu))
    boolean = st.recursive(preds, lambda c: st.one_of(
        st.lists(c, min_size=2, max_size=2).map(lambda k: And(tuple(k))),
        st.lists(c, min_size=2, max_size=2).map(lambda k: Or(tuple(k))),
        st.builds(Not, c)), max_leaves=3)
    iv = st.tuples(st.sampled_from([0.0, 0.5, 1.0]), st.sampled_from([0.0, 0.5, 1.0])).map(
        lambda ab: (min(ab), max(ab)))

    def temporal(child):
        return st.one_of(
            st.builds(lambda ab, c: Eventually(ab[0], ab[1], c), iv, child),
            st.builds(lambda ab, c: Always(ab[0], ab[1], c), iv, child),
            st.builds(lambda ab, l, r: Until(ab[0], ab[1], l, r), iv, child, child))
    if temporal_child_boolean:
        leaf = st.one_of(boolean, temporal(boolean))
        return st.lists(leaf, min_size=1, max_size=2).map(
            lambda k: k[0] if len(k) == 1 else And(tuple(k)))
    return st.recursive(boolean, lambda c: st.one_of(
        temporal(c), st.lists(c, min_size=2, max_size=2).map(lambda k: Or(tuple(k)))),
        max_leaves=4)


def _solve(sys, f, instants, **kw):
    opts = dict(u_lower=[-3.0], u_upper=[3.0])
    opts.update(kw)
    enc = Encoder(sys, jordan_decompose(sys), [0.2, -0.1], f, instants, EncodingOptions(**opts))
    model = enc.build()
    return enc, model, solve(model, node_limit=5000)


def _neg_until_free(f):
    try:
        to_nnf(f)
        return True
    except ValueError:
        return False


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(_formulas())
def test_instant_soundness(double_integrator, f):
    if not _neg_until_free(f):
        return
    H = max(horizon(f), 0.5)
    inst = np.arange(0.0, H + 0.25, 0.5)
    enc, model, res = _solve(double_integrator, f, inst, continuous=False)
    if res.status != OPTIMAL:
        return
    assert model.max_violation(res.x, int_tol=1e-6) <= 1e-6
    states, _ = enc.decode(res.x)
    assert brute_eval(to_nnf(f), enc.inst, states, 0, tol=1e-7)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(_formulas(temporal_child_boolean=True))
def test_continuous_soundness(double_integrator, f):
    if not _neg_until_free(f) or isinstance(f, Until):
        return
    H = max(horizon(f), 0.5)
    inst = np.arange(0.0, H + 0.25, 0.5)
    enc, model, res = _solve(double_integrator, f, inst)
    if res.status != OPTIMAL:
        return
    _, controls = enc.decode(res.x)
    ver = monitor.verify(double_integrator, enc.jf, [0.2, -0.1], enc.inst, controls, to_nnf(f),
                         delta=1e-3)
    assert ver.margin >= -1e-6


def test_monotone_in_instants(double_integrator):
    rng = np.random.default_rng(41)
    jf = jordan_decompose(double_integrator)
    texts = ["F[0,1](x1 >= 0.4) & G[0,2](x1 <= 1)", "G[0.5,2](x2 >= -0.5) & F[1,2](x1 >= 0.6)",
             "F[0,2](x1 >= 0.5 & x2 <= 0.1)", "G[0,2](x1 >= -0.1 | x2 >= 0.2)"]
    for text in texts:
        f = parse_formula(text, 2)
        inst = np.array([0.0, 1.0, 2.0])
        feasible_before = False
        for _ in range(3):
            enc = Encoder(double_integrator, jf, [0.0, 0.0], f, inst,
                          EncodingOptions(u_lower=[-5.0], u_upper=[5.0]))
            ok = solve(enc.build()).status == OPTIMAL
            assert ok or not feasible_before, text
            feasible_before = ok
            inst = np.sort(np.concatenate([inst, (inst[:-1] + inst[1:]) / 2]))
        assert feasible_before
