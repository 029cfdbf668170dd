import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potentia.heavytail import ComonotoneSplit, Exponential, IndependentProduct, Pareto, Univariate
from potentia.payoffs import (
    ClaimTail,
    Constant,
    ConstantPenalty,
    Custom,
    DeficitExceeds,
    IndicatorBall,
    IndicatorQuadrant,
    PowerUtility,
    integrate_segments,
    simpson_segment,
)


def brute(payoff, x0, a, dur, n=200_001):
    s = np.linspace(0.0, dur, n)
    pts = x0[None, :] + s[:, None] * np.asarray(a)[None, :]
    v = payoff(pts)
    return float(np.sum((v[1:] + v[:-1]) / 2) * (s[1] - s[0]))


coord = st.floats(-5, 5)
slope = st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3)


@given(x=coord, y=coord, a=slope, b=slope, dur=st.floats(0.1, 8))
@settings(max_examples=40, deadline=None)
def test_ball_and_quadrant_segment_integrals(x, y, a, b, dur):
    x0 = np.array([x, y])
    for p in (IndicatorBall(1.5), IndicatorQuadrant(1.0)):
        exact = float(p.segment_integral(x0[None, :], np.array([a, b]), np.array([dur]))[0])
        assert exact == pytest.approx(brute(p, x0, [a, b], dur), abs=2e-4)


@given(x=st.floats(-3, 20), y=st.floats(-3, 20), a=st.floats(0.1, 3), b=st.floats(0.1, 3),
       dur=st.floats(0.1, 10), share=st.floats(0.1, 0.9))
@settings(max_examples=40, deadline=None)
def test_comonotone_claim_tail_segment(x, y, a, b, dur, share):
    p = ClaimTail(1.5, ComonotoneSplit(Pareto(1.0), (share, 1 - share)))
    x0 = np.array([x, y])
    exact = float(p.segment_integral(x0[None, :], np.array([a, b]), np.array([dur]))[0])
    assert exact == pytest.approx(brute(p, x0, [a, b], dur), rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("law", [Pareto(1.0), Exponential(1.0)], ids=repr)
@pytest.mark.parametrize("a", [2.0, -1.0, 0.0])
def test_univariate_claim_tail_segment(law, a):
    p = ClaimTail(2.0, Univariate(law), shift=0.5)
    x0 = np.array([1.0])
    exact = float(p.segment_integral(x0[None, :], np.array([a]), np.array([3.0]))[0])
    assert exact == pytest.approx(brute(p, x0, [a], 3.0), rel=1e-6)


def test_product_claim_tail_falls_back_to_simpson():
    p = ClaimTail(1.0, IndependentProduct((Pareto(1.0), Pareto(1.0))))
    x0 = np.array([[2.0, 3.0]])
    assert p.segment_integral(x0, np.array([1.0, 1.0]), np.array([2.0])) is None
    v = integrate_segments(p, x0, np.array([1.0, 1.0]), np.array([2.0]))
    assert v[0] == pytest.approx(brute(p, x0[0], [1.0, 1.0], 2.0), rel=1e-4)


def test_simpson_exact_for_cubics():
    p = Custom(lambda x: x[:, 0] ** 3, bound=math.inf)
    v = simpson_segment(p, np.array([[0.0]]), np.array([1.0]), np.array([2.0]))
    assert v[0] == pytest.approx(4.0, rel=1e-12)


def test_constant_and_scaled():
    c = Constant(2.0)
    assert np.all(c(np.zeros((3, 2))) == 2.0)
    s = IndicatorBall(1.0).scaled(3.0)
    assert s.sup == 3.0
    assert s(np.array([[0.5]]))[0] == 3.0
    v = s.segment_integral(np.array([[-1.0]]), np.array([1.0]), np.array([5.0]))
    assert v[0] == pytest.approx(6.0)


def test_power_utility_values_and_cap():
    u = PowerUtility(0.5, (0.5, 0.5), 1.0, cap=100.0)
    assert u(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.0)
    assert u(np.array([[math.log(4.0), math.log(4.0)]]))[0] == pytest.approx(0.5)
    assert u(np.array([[-1e4, 0.0]]))[0] == 100.0
    with pytest.raises(ValueError):
        PowerUtility(1.5, (1.0,), 1.0)


def test_penalties_and_compensators():
    law = Exponential(1.0)
    assert np.all(ConstantPenalty(2.0)(np.ones(3), np.ones(3)) == 2.0)
    assert DeficitExceeds(1.0)(np.ones(2), np.array([0.5, 2.0])).tolist() == [0.0, 1.0]
    comp = DeficitExceeds(1.0).compensator(3.0, Univariate(law))
    assert comp(np.array([[2.0]]))[0] == pytest.approx(3.0 * math.exp(-3.0))
    comp = ConstantPenalty(2.0).compensator(3.0, Univariate(law))
    assert comp(np.array([[2.0]]))[0] == pytest.approx(6.0 * math.exp(-2.0))
