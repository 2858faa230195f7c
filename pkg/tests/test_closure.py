import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from closure_lab.closure import (FlowSpec, RenormSchedule, closure_field, conjugate, euler_flow, iterate,
                                 iterate_flow_compare, renormalize)
from closure_lab.errors import EscapeError, NotConverged, NotCrossed, ValidationError
from closure_lab.groups import Contraction
from closure_lab.jets import Jet, NormSpec, VFJet, compose

F_HALF = Contraction((0.5,))
X_LIN = VFJet.from_terms(1, 1, {(0, (1,)): 1.0})


def translation(eps, d=1):
    return Jet.from_terms(1, d, {(0, (0,)): eps, (0, (1,)): 1.0})


# conjugation


@given(st.integers(0, 30), st.floats(-1, 1))
def test_conjugate_matches_composition(k, c):
    g = Jet.from_terms(1, 3, {(0, (0,)): 0.01, (0, (1,)): 1.0 + 0.1 * c, (0, (2,)): c, (0, (3,)): 0.3})
    Fk = F_HALF.jet(3, k)
    Fmk = F_HALF.jet(3, -k)
    assert conjugate(g, F_HALF, k).equals(compose(Fmk, compose(g, Fk)), 1e-12 * 2.0**k)


# renormalization


@pytest.mark.parametrize("eps,k", [(1e-4, 10), (1e-6, 17), (1e-8, 24)])
def test_case1_threshold_crossing(eps, k):
    rep = renormalize(translation(eps), F_HALF, RenormSchedule(threshold=0.1))
    # direct iteration oracle: smallest k with 2^k eps > T
    oracle = next(j for j in range(1, 100) if 2.0**j * eps > 0.1)
    assert rep.case == "Case1"
    assert rep.k == oracle == k == math.ceil(math.log2(0.1 / eps))
    assert rep.h.equals(translation(2.0**k * eps), 1e-15)
    assert rep.minimal and rep.sandwich


def test_case2_contracting():
    g = Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (2,)): 1e-3})
    rep = renormalize(g, F_HALF, RenormSchedule(threshold=0.1))
    assert rep.case == "Case2_contracting" and rep.converges_to_identity
    tail = np.array(rep.displacement_tail)
    assert np.allclose(tail[1:] / tail[:-1], 0.5, rtol=0, atol=1e-12)
    for k in (0, 3, 9):
        assert conjugate(g, F_HALF, k).coefficient(0, (2,)) == pytest.approx(1e-3 * 2.0**-k, rel=1e-15)


def test_case2_concentrated_linear_part():
    eps = 1e-3
    g = Jet.from_terms(1, 1, {(0, (1,)): 1.0 + eps})
    rep = renormalize(g, F_HALF, RenormSchedule(threshold=0.1))
    assert rep.case == "Case2_concentrated" and rep.k == 0
    for k in (0, 5, 50):
        assert conjugate(g, F_HALF, k).equals(g, 0.0)


def test_not_crossed_is_explicit():
    with pytest.raises(NotCrossed):
        renormalize(translation(1e-12), F_HALF, RenormSchedule(threshold=0.1, k_max=10))


def test_renormalize_preconditions():
    with pytest.raises(ValidationError):
        renormalize(Jet.identity(1, 1), F_HALF, RenormSchedule(threshold=0.1))
    with pytest.raises(ValidationError):
        renormalize(translation(0.5), F_HALF, RenormSchedule(threshold=0.1))
    with pytest.raises(ValidationError):
        g = Jet.from_terms(2, 2, {(0, (1, 0)): 1.0, (1, (0, 1)): 1.0, (0, (0, 0)): 1e-6})
        renormalize(g, Contraction((0.25, 0.5)), RenormSchedule(threshold=0.1))  # resonant


def test_default_threshold_rule():
    sched = RenormSchedule(delta_seq=(1e-6, 1e-7), order=1, norm_constant=3.0)
    assert sched.threshold_for(0, 2, 1) == pytest.approx(10 * 3.0 * 1e-6)
    assert sched.threshold_for(5, 2, 1) == pytest.approx(10 * 3.0 * 1e-7)
    assert RenormSchedule(delta_seq=(0.0,)).delta() == 1e-12
    with pytest.raises(ValidationError):
        RenormSchedule(delta_seq=(1e-7, 1e-6))


def test_report_json_round_trip():
    import json

    rep = renormalize(translation(1e-6), F_HALF, RenormSchedule(threshold=0.1))
    d = json.loads(rep.to_json())
    assert d["k"] == 17 and d["case"] == "Case1"


# limit fields


def test_closure_field_translations():
    seq = [Jet.from_terms(2, 1, {(0, (1, 0)): 1.0, (1, (0, 1)): 1.0, (0, (0, 0)): 2.0**-i}) for i in range(1, 12)]
    X = closure_field(seq)
    assert X.equals(VFJet.from_terms(2, 1, {(0, (0, 0)): 1.0}), 1e-15)


def test_closure_field_quadratic():
    seq = [Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (2,)): 2.0**-i}) for i in range(1, 12)]
    assert closure_field(seq).equals(VFJet.from_terms(1, 2, {(0, (2,)): 1.0}), 1e-15)


def test_closure_field_from_renormalized_family():
    # g_i = x + e_i + e_i x^2; renormalization blows the constant part up while the
    # x^2 part shrinks, so the limit is proportional to d/dx
    hs = []
    for i in range(4, 16):
        e = 10.0**-i / 2
        g = Jet.from_terms(1, 2, {(0, (0,)): e, (0, (1,)): 1.0, (0, (2,)): e})
        hs.append(renormalize(g, F_HALF, RenormSchedule(threshold=0.1)).h)
    X = closure_field(hs, tol=1e-2)
    assert X.coefficient(0, (0,)) == pytest.approx(1.0, abs=1e-2)
    assert abs(X.coefficient(0, (2,))) < 1e-2


def test_closure_field_not_converged():
    seq = [Jet.from_terms(1, 2, {(0, (1,)): 1.0, (0, (i % 2 + 1,)): 2.0**-i}) for i in range(1, 12)]
    with pytest.raises(NotConverged) as exc:
        closure_field(seq)
    assert len(exc.value.diagnostics["oscillation"]) == 10


# flows and iterates


def test_euler_constant_field_exact():
    X = VFJet.from_terms(3, 1, {(0, (0, 0, 0)): 1.0})
    assert np.allclose(euler_flow(X, np.zeros(3), 0.5, 7), [0.5, 0, 0], atol=1e-15)


def test_euler_linear_field_closed_form():
    x = euler_flow(X_LIN, np.array([1.0]), 1.0, 10_000)
    assert abs(x[0] - math.e) <= 2e-4
    assert x[0] == pytest.approx((1 + 1e-4) ** 10_000, rel=1e-12)


def test_euler_zero_time():
    p = np.array([0.3, -0.2])
    X = VFJet.from_terms(2, 1, {(0, (1, 0)): 5.0})
    assert np.array_equal(euler_flow(X, p, 0.0, 10), p)


def test_escape_reports_step():
    with pytest.raises(EscapeError) as exc:
        euler_flow(X_LIN, np.array([0.5]), 2.0, 1000, domain=((-1, 1),))
    step = exc.value.diagnostics["step"]
    # (1 + 2/1000)^m * 0.5 first exceeds 1 at this step
    assert step == math.ceil(math.log(2) / math.log(1.002))
    with pytest.raises(EscapeError):
        iterate(translation(0.1), np.array([0.0]), 20, domain=((-1, 1),))


def test_iterate_matches_closed_form():
    h = Jet.from_terms(1, 1, {(0, (1,)): 1.001})
    assert iterate(h, np.array([0.5]), 1000)[0] == pytest.approx(0.5 * 1.001**1000, rel=1e-12)


def test_compare_translation_floor_defect():
    X = VFJet.from_terms(1, 1, {(0, (0,)): 1.0})
    for C in (0.3, 0.07, 1e-3):
        h = translation(C)
        assert iterate_flow_compare(X, h, C, 1.0) <= C + 1e-12


def test_compare_linear_closed_form():
    C = 1e-3
    h = Jet.from_terms(1, 1, {(0, (1,)): 1 + C})
    err = iterate_flow_compare(X_LIN, h, C, 1.0, FlowSpec(grid=((0.0, 0.5),)))
    oracle = 0.5 * abs((1 + C) ** math.floor(1 / C) - math.e)
    assert err <= 2e-3
    assert err == pytest.approx(oracle, rel=2e-2)


def test_compare_zero_time():
    assert iterate_flow_compare(X_LIN, translation(0.1), 0.1, 0.0) == 0.0


def test_flow_spec_steps():
    assert FlowSpec().euler_steps(1e-5) == 10_000_000
    assert FlowSpec().euler_steps(1e-2) == 10_000
    assert FlowSpec(steps=7).euler_steps(1e-9) == 7
