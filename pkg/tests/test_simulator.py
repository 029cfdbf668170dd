import math

import numpy as np
import pytest

from potentia.heavytail import ComonotoneSplit, Exponential, Pareto, Univariate
from potentia.kernels import DriftBrownian, DriftOnly, ExpKill, FirstPassageRuin, QuadrantExit
from potentia.payoffs import ConstantPenalty, Constant, IndicatorBall
from potentia.rng import stream
from potentia.simulator import (
    CHUNK,
    NetProfitError,
    RiskProcessSpec,
    estimate_dual_tail,
    estimate_gerber_shiu,
    estimate_potential,
    estimate_potential_expkill,
    estimate_quadrant_ruin,
    estimate_ruin,
    gerber_shiu_compensation,
    sample_path,
)


def exp_ruin_spec():
    return RiskProcessSpec(1.0, Univariate(Exponential(1.0)), DriftOnly(2.0), FirstPassageRuin())


def psi(x):
    return 0.5 * math.exp(-0.5 * x)


def test_constant_payoff_is_c_over_mu():
    spec = RiskProcessSpec(1.0, Univariate(Pareto(1.0)), DriftOnly(1.0), ExpKill(2.0), Constant(3.0))
    (e,) = estimate_potential_expkill(spec, [0.0], 40_000, 7)
    assert e.within(1.5, 4.0)
    assert e.kind == "potential" and e.n_paths == 40_000


def test_exponential_ruin_closed_form():
    res = estimate_ruin(exp_ruin_spec(), [0.0, 2.0], 100_000, 11)
    for e in res:
        assert e.bias_proxy < 0.02
        assert e.within(psi(e.x[0]), 3.0, e.bias_proxy * e.estimate)


def test_ruin_monotone_in_start():
    res = estimate_ruin(exp_ruin_spec(), [0.0, 1.0, 2.0, 4.0], 20_000, 3, horizon=200.0)
    est = [e.estimate for e in res]
    assert all(a >= b for a, b in zip(est, est[1:]))


def test_dual_maximum_matches_ruin():
    for e in estimate_dual_tail(Exponential(1.0), 1.0, 2.0, [0.0, 1.0, 3.0], 200_000, 5):
        assert e.within(psi(e.x[0]), 4.0)


def test_dual_refuses_unprofitable():
    with pytest.raises(NetProfitError):
        estimate_dual_tail(Exponential(1.0), 1.0, 0.5, [1.0], 10, 1)


def test_net_profit_checked_on_construction():
    with pytest.raises(NetProfitError, match="net-profit"):
        RiskProcessSpec(1.0, Univariate(Pareto(1.0)), DriftOnly(1.5), FirstPassageRuin())


def test_gerber_shiu_discounted_ruin():
    # E[e^{-q tau}] for lam = 1, a = 2, Exp(1), q = 0.1 (closed form, R = 0.5422...)
    ref = {0.0: 0.457785561488762, 1.0: 0.266183635496707}
    res = estimate_gerber_shiu(exp_ruin_spec(), ConstantPenalty(1.0), 0.1, list(ref), 60_000, 13,
                               horizon=150.0)
    for e in res:
        assert e.within(ref[e.x[0]], 4.0)


def test_gerber_shiu_compensation_agrees():
    ref = 0.457785561488762
    (e,) = gerber_shiu_compensation(exp_ruin_spec(), ConstantPenalty(1.0), 0.1, [0.0], 60_000, 17,
                                    horizon=150.0)
    assert e.within(ref, 4.0)


def test_quadrant_direct_and_compensation_agree():
    spec = RiskProcessSpec(1.0, ComonotoneSplit(Pareto(1.0), (0.3, 0.7)), DriftOnly([1.2, 1.8]),
                           QuadrantExit())
    for q in estimate_quadrant_ruin(spec, [[1.0, 2.0], [5.0, 5.0]], 20_000, 19, horizon=100.0):
        assert q.agree(4.0)
        assert 0 < q.direct.estimate < 1


def test_results_do_not_depend_on_workers():
    spec = RiskProcessSpec(1.0, Univariate(Pareto(1.0)), DriftOnly(1.0), ExpKill(1.0), IndicatorBall(1.0))
    n = 2 * CHUNK + 100
    a = estimate_potential(spec, [0.0, 2.0], n, 23, workers=1)
    b = estimate_potential(spec, [0.0, 2.0], n, 23, workers=3)
    assert a == b


def test_brownian_engine_workers_and_seed():
    spec = RiskProcessSpec(1.0, Univariate(Pareto(1.0)), DriftBrownian(0.5, 1.0), ExpKill(1.0),
                           IndicatorBall(1.0))
    a = estimate_potential(spec, [0.0], CHUNK + 10, 29, workers=1)
    b = estimate_potential(spec, [0.0], CHUNK + 10, 29, workers=2)
    c = estimate_potential(spec, [0.0], CHUNK + 10, 30, workers=1)
    assert a == b
    assert a[0].estimate != c[0].estimate


def test_sample_path_claim_count():
    spec = exp_ruin_spec()
    g = stream(31, 0)
    counts = [sample_path(spec, g, 10.0).n_events for _ in range(2000)]
    assert abs(np.mean(counts) - 10.0) < 4 * math.sqrt(10.0 / 2000)


def test_sample_path_drift_only_bookkeeping():
    spec = exp_ruin_spec()
    p = sample_path(spec, stream(37, 0), 20.0, x=[3.0])
    assert p.is_claim.all()
    assert np.all(np.diff(p.times) > 0)
    level = 3.0
    prev = 0.0
    for t, J, pre, post in zip(p.times, p.jumps[:, 0], p.pre[:, 0], p.post[:, 0]):
        level += 2.0 * (t - prev)
        assert pre == pytest.approx(level)
        level += J
        assert post == pytest.approx(level)
        assert J < 0
        prev = t


def test_spec_rejects_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        RiskProcessSpec(1.0, Univariate(Pareto(1.0)), DriftOnly([1.0, 1.0]), ExpKill(1.0))
