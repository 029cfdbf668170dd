import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potentia.asymptotics import (
    FINITE,
    INCONCLUSIVE,
    INFINITE,
    ZERO,
    InconclusiveError,
    PowerPath,
    classify_regime,
    geometric_ladder,
    predict_2d_product,
    predict_comonotone,
    predict_potential,
    predict_prop_reinsurance,
    predict_ruin,
    ratio_curve,
    strong_subexp_check,
)
from potentia.heavytail import Exponential, IntegratedTail, Pareto, Weibull
from potentia.payoffs import ClaimTail, Custom, IndicatorBall
from potentia.heavytail import Univariate

PARETO = Pareto(1.0)


def test_ladder():
    assert geometric_ladder(1.0, 2.0, 6).tolist() == [1, 2, 4, 8, 16, 32]
    with pytest.raises(ValueError):
        geometric_ladder(1.0, 2.0, 5)


def test_power_path():
    p = PowerPath((1.0, 2.0), (1.0, 2.0))
    assert p([3.0]).tolist() == [[3.0, 18.0]]


def test_regime_zero_for_bounded_support():
    r = classify_regime(IndicatorBall(1.0), PARETO, start=4.0, rungs=6)
    assert r.kind == ZERO and r.B == 0.0


def test_regime_finite_for_claim_tail():
    r = classify_regime(ClaimTail(1.0, Univariate(PARETO)), PARETO, start=2.0, rungs=8)
    assert r.kind == FINITE
    assert r.B == pytest.approx(1.0)


def test_regime_infinite_and_zero_for_power_payoffs():
    up = Custom(lambda x: np.abs(x[:, 0]) ** -1.0, bound=math.inf)
    down = Custom(lambda x: np.abs(x[:, 0]) ** -3.0, bound=math.inf)
    assert classify_regime(up, PARETO, rungs=12).kind == INFINITE
    assert classify_regime(down, PARETO, rungs=12).kind == ZERO


def test_regime_inconclusive_on_short_ladder():
    up = Custom(lambda x: np.abs(x[:, 0]) ** -1.0, bound=math.inf)
    r = classify_regime(up, PARETO, rungs=6)
    assert r.kind == INCONCLUSIVE and math.isnan(r.B)
    with pytest.raises(InconclusiveError):
        predict_potential(r, 0.5, PARETO, up)


def test_regime_oscillating_is_inconclusive():
    wig = Custom(lambda x: (2 + np.sin(np.log2(x[:, 0]) * math.pi / 2)) * x[:, 0] ** -2.0, bound=3.0)
    assert classify_regime(wig, PARETO, rungs=12).kind == INCONCLUSIVE


@given(c=st.floats(1e-3, 1e3), p=st.floats(-3.5, -0.5))
@settings(max_examples=50, deadline=None)
def test_regime_scale_invariant(c, p):
    base = Custom(lambda x: np.abs(x[:, 0]) ** p, bound=math.inf)
    r1 = classify_regime(base, PARETO, rungs=14)
    r2 = classify_regime(base.scaled(c), PARETO, rungs=14)
    assert r1.kind == r2.kind
    if r1.kind == FINITE:
        assert r2.B == pytest.approx(c * r1.B)


def test_regime_finite_B_is_linear():
    l = ClaimTail(1.0, Univariate(PARETO))
    b1 = classify_regime(l, PARETO, rungs=8).B
    b3 = classify_regime(l.scaled(3.0), PARETO, rungs=8).B
    assert b3 == pytest.approx(3.0 * b1)


def test_predict_potential_values():
    r = classify_regime(ClaimTail(2.0, Univariate(PARETO)), PARETO, rungs=8)
    pred = predict_potential(r, 0.5, PARETO, payoff_scale=0.5)
    assert pred.prefactor == pytest.approx(1.0)
    assert pred(np.array([[10.0]]))[0] == pytest.approx(0.01)
    assert pred.applicable
    zero = predict_potential(classify_regime(IndicatorBall(1.0), PARETO, start=4.0), 0.5, PARETO)
    assert not zero.quantitative and zero.prefactor == 0.0
    with pytest.raises(ValueError):
        predict_potential(r, 1.0, PARETO)


def test_predict_ruin_pareto():
    pred = predict_ruin(0.5, PARETO)
    # rho/(1-rho) * Fbar_I(100) = 1 * 1/(2 * 100)
    assert pred(np.array([100.0]))[0] == pytest.approx(0.005)
    assert pred.applicable


def test_predict_ruin_flags_light_tail():
    pred = predict_ruin(0.5, IntegratedTail(Exponential(1.0)))
    assert pred.flags and not pred.applicable


def test_product_cases():
    f = Pareto(1.0)
    assert predict_2d_product(f, f, PowerPath((1.0, 1.0), (1.0, 2.0)), geometric_ladder(1, 2, 16)).case == "first"
    assert predict_2d_product(f, f, PowerPath((1.0, 1.0), (2.0, 1.0)), geometric_ladder(1, 2, 16)).case == "second"
    both = predict_2d_product(f, f, (1.0, 1.0), geometric_ladder(1, 2, 16))
    assert both.case == "both"
    assert both(np.array([[10.0, 10.0]]))[0] == pytest.approx(0.02)
    with pytest.raises(TypeError):
        predict_2d_product(f, Exponential(1.0), (1.0, 1.0))


def test_comonotone_cases():
    h = Pareto(1.0)
    diag = predict_comonotone(h, 0.3, (1.0, 1.0))
    # x2 / 0.7 < x1 / 0.3 on the diagonal, so the second level is the smaller one
    assert diag.case == "second"
    assert diag(np.array([[3.0, 3.0]]))[0] == pytest.approx((0.7 / 3.0) ** 2)
    assert predict_comonotone(h, 0.5, (2.0, 1.0)).case == "second"
    assert predict_comonotone(h, 0.5, (1.0, 2.0)).case == "first"
    bnd = predict_comonotone(h, 0.5, (1.0, 1.0))
    assert bnd.case == "boundary" and not bnd.applicable


def test_strong_subexponential_quadrature():
    # int_0^b Fbar(b-y) Fbar(y) dy / (2 E Z Fbar(b)) for Fbar(z) = z^-2 (mpmath)
    chk = strong_subexp_check(PARETO, [100.0, 1000.0])
    assert chk.ratios[0] == pytest.approx(1.04595119850135, rel=1e-6)
    assert chk.ratios[1] == pytest.approx(1.00690675477865, rel=1e-6)
    assert chk.passed
    assert strong_subexp_check(Weibull(0.5), [1000.0]).ratios[0] > 1.0


def test_prop_reinsurance_matches_hand_integral():
    pred = predict_prop_reinsurance(PARETO, 3.0, 2.0, 1.0, 0.4, (10.0, 20.0))
    # c = (2.2, 0.8); levels (25 + 5.5 t, 33.33 + 1.33 t) cross at t = 2
    hand = (1 / 25 - 1 / 36) / 5.5 + (1 / 36) / (0.8 / 0.6)
    assert pred.crossing == pytest.approx(2.0)
    assert pred.value == pytest.approx(hand, rel=1e-12)
    assert pred.value == pytest.approx(0.0230555555555556, rel=1e-12)
    assert pred.error < 1e-6 * pred.value
    assert pred.case_holds


def test_prop_reinsurance_literal_levels():
    pred = predict_prop_reinsurance(PARETO, 3.0, 2.0, 1.0, 0.4, (10.0, 20.0), per_share=False)
    # levels 10 + 2.2 t and 20 + 0.8 t cross at t = 50/7, level 180/7
    cross = 180.0 / 7.0
    hand = (1 / 10 - 1 / cross) / 2.2 + (1 / cross) / 0.8
    assert pred.value == pytest.approx(hand, rel=1e-12)
    assert pred.error < 1e-6 * pred.value


def test_prop_reinsurance_rejects_unprofitable():
    with pytest.raises(ValueError, match="drift"):
        predict_prop_reinsurance(PARETO, 0.5, 2.0, 1.0, 0.4, (1.0, 1.0))


def test_ratio_curve():
    c = ratio_curve([1, 2, 4, 8], [2.0, 1.5, 1.2, 1.1], [1, 1, 1, 1])
    assert c.within(1.0, 2.0) and not c.within(1.2, 2.0)
    assert c.settling()
    assert not ratio_curve([1, 2, 3], [1.1, 1.0, 1.3], [1, 1, 1]).settling()
