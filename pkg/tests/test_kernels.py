import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potentia.heavytail import Exponential, Pareto, Weibull
from potentia.kernels import (
    DecayFit,
    DegenerateFitError,
    DriftBrownian,
    DriftOnly,
    DriftSmallJumps,
    ExpKill,
    FirstPassageRuin,
    OrnsteinUhlenbeck,
    UniformJumps,
    UnsupportedComponentError,
    build_kernel,
    decay_rate_fit,
    drift_only_tail,
    forcing_term,
    q_function,
    q_measure,
    theta_q,
)
from potentia.payoffs import Constant, IndicatorBall
from potentia.renewal import Grid

LAWS = [Pareto(1.0), Exponential(1.0), Weibull(0.5)]


@pytest.mark.parametrize("lam,mu", [(1.0, 1.0), (0.5, 1.0), (2.0, 1.0), (1.0, 0.5), (1.0, 2.0), (4.0, 3.0)])
@pytest.mark.parametrize("law", LAWS, ids=repr)
def test_kernel_mass_drift_only(lam, mu, law):
    K = build_kernel(lam, law, DriftOnly(1.0), ExpKill(mu), Grid(0.05, 80.0, -80.0))
    assert abs(K.mass - lam / (lam + mu)) < 1e-6


@pytest.mark.parametrize("small", [DriftBrownian(0.5, 1.0), DriftSmallJumps(1.0, 2.0, UniformJumps(-0.5, 0.5))],
                         ids=["brownian", "small_jumps"])
def test_kernel_mass_other_components(small):
    K = build_kernel(1.0, Pareto(1.0), small, ExpKill(1.0), Grid(0.05, 80.0, -80.0))
    assert abs(K.mass - 0.5) < 1e-6
    assert np.all(K.measure.weights >= 0)


def test_kernel_exponential_closed_form():
    # lam e^{-z} / (lam + mu + 1) for drift a = 1, Exp(1) claims
    lam, mu = 1.0, 1.0
    z = np.array([0.0, 0.5, 2.0, 5.0])
    tail, err = drift_only_tail(lam, mu, 1.0, Exponential(1.0), z)
    assert np.allclose(tail, lam * np.exp(-z) / (lam + mu + 1.0), rtol=1e-9)
    assert err.max() < 1e-9


def test_kernel_pareto_against_quadrature():
    # int_0^inf e^{-2t} Fbar(z + t) dt for Fbar(z) = z^-2 (mpmath, 30 digits)
    z = np.array([0.0, 10.0, 100.0])
    tail, _ = drift_only_tail(1.0, 1.0, 1.0, Pareto(1.0), z)
    ref = [0.469866620202184, 4.56290900807832e-3, 4.95073536412868e-5]
    assert np.allclose(tail, ref, rtol=1e-8)
    K = build_kernel(1.0, Pareto(1.0), DriftOnly(1.0), ExpKill(1.0), Grid(0.05, 200.0))
    assert np.allclose(K.measure.tail(z), ref, rtol=2e-3)


def test_kernel_tail_equivalence_pareto():
    K = build_kernel(1.0, Pareto(1.0), DriftOnly(1.0), ExpKill(1.0), Grid(0.1, 1000.0))
    x = 1000.0 - 0.1
    ratio = K.normalized().tail(x) / Pareto(1.0).tail(x)
    assert 0.9 <= ratio <= 1.1


def test_kernel_tail_exponential_claims_converge_to_analytic_constant():
    # Gbar(z) / Fbar(z) = lam / (lam + mu + beta a), not 1
    K = build_kernel(1.0, Exponential(1.0), DriftOnly(1.0), ExpKill(1.0), Grid(0.05, 30.0))
    z = 20.0
    assert K.measure.tail(z) / math.exp(-z) == pytest.approx(1.0 / 3.0, rel=1e-3)


def test_kernel_refuses_ou_and_ruin():
    ou = OrnsteinUhlenbeck(1.0, -1.0, 1.0, UniformJumps(0.0, 0.5))
    with pytest.raises(UnsupportedComponentError):
        build_kernel(1.0, Pareto(1.0), ou, ExpKill(1.0), Grid(0.1, 10.0))
    with pytest.raises(UnsupportedComponentError):
        build_kernel(1.0, Pareto(1.0), DriftOnly(1.0), FirstPassageRuin(), Grid(0.1, 10.0))


def test_kernel_csv_has_provenance():
    K = build_kernel(1.0, Exponential(1.0), DriftOnly(1.0), ExpKill(1.0), Grid(0.1, 10.0))
    lines = K.to_csv().splitlines()
    assert lines[0] == "# potentia-csv v1"
    assert '"panels": 4096' in lines[1]
    assert lines[2] == "z,weight"


# ---------------------------------------------------------------- q


def test_q_brownian_symmetric_and_normalized():
    small = DriftBrownian(0.0, 1.0)
    w = np.linspace(-10, 10, 2001)
    q = q_function(1.0, small, ExpKill(1.0), w)
    assert np.allclose(q, q[::-1])
    assert np.argmax(q) == 1000
    assert q_measure(1.0, small, ExpKill(1.0), 0.01).mass == pytest.approx(0.5, abs=1e-9)


def test_q_brownian_with_drift():
    # q(0) = lam / sqrt(a^2 + 2 kappa sigma^2), int q = 0.5 (mpmath)
    small = DriftBrownian(0.5, 1.0)
    assert q_function(1.0, small, ExpKill(1.0), 0.0) == pytest.approx(0.485071250072666, rel=1e-12)
    assert q_measure(1.0, small, ExpKill(1.0), 0.01).mass == pytest.approx(0.5, abs=1e-9)


@given(lam=st.floats(0.1, 5), mu=st.floats(0.1, 5), a=st.floats(-2, 2), sigma=st.floats(0.2, 2))
@settings(max_examples=40, deadline=None)
def test_q_positive_with_mass_rho(lam, mu, a, sigma):
    small = DriftBrownian(a, sigma)
    Q = q_measure(lam, small, ExpKill(mu), 0.02)
    assert np.all(Q.weights >= 0)
    assert Q.mass == pytest.approx(lam / (lam + mu), abs=1e-8)


def test_q_log_decreasing_linearly():
    w = np.linspace(2, 12, 101)
    lq = np.log(q_function(1.0, DriftBrownian(0.0, 1.0), ExpKill(1.0), w))
    assert np.all(np.diff(lq) < 0)


def test_q_drift_only_one_sided():
    q = q_function(1.0, DriftOnly(2.0), ExpKill(1.0), np.array([-1.0, 1.0]))
    assert q[0] == 0.0
    # (lam / a) exp(-(lam + mu) w / a)
    assert q[1] == pytest.approx(0.5 * math.exp(-1.0))


def test_q_unsupported():
    with pytest.raises(UnsupportedComponentError):
        q_function(1.0, DriftSmallJumps(1.0, 1.0, UniformJumps(-0.5, 0.5)), ExpKill(1.0), 0.0)


# ---------------------------------------------------------------- decay


def test_decay_rate_brownian():
    w = np.linspace(2, 12, 200)
    fit = decay_rate_fit(w, q_function(1.0, DriftBrownian(0.0, 1.0), ExpKill(1.0), w), (2, 12), 2.0)
    assert isinstance(fit, DecayFit)
    assert abs(fit.theta / 2.0 - 1.0) < 0.1


def test_decay_rate_increases_with_lambda():
    w = np.linspace(2, 12, 200)
    th = [decay_rate_fit(w, q_function(lam, DriftBrownian(0.0, 1.0), ExpKill(1.0), w)).theta
          for lam in (1.0, 2.0, 4.0)]
    assert th[0] < th[1] < th[2]


def test_decay_fit_degenerate():
    with pytest.raises(DegenerateFitError, match="degenerate fit"):
        decay_rate_fit(np.linspace(1, 5, 20), np.ones(20))
    with pytest.raises(DegenerateFitError):
        decay_rate_fit(np.linspace(1, 5, 5), np.exp(-np.linspace(1, 5, 5)))


def test_theta_q():
    assert theta_q(1.0, 2.0, 5.0) == 0.25
    assert theta_q(1.0, 0.0, 5.0) == 5.0


# ---------------------------------------------------------------- forcing term


def test_forcing_constant_payoff():
    # l = c: h = c / (lam + mu) before the first claim or killing
    x = np.array([[0.0], [3.0]])
    for small in (DriftOnly(1.0), DriftBrownian(1.0, 0.5)):
        h = forcing_term(2.0, small, ExpKill(1.0), Constant(3.0), x[:, 0])
        assert np.allclose(h, 1.0, rtol=1e-6)


def test_forcing_indicator_drift_only():
    # int_0^inf e^{-2t} 1{|x + t| <= 1} dt from x = -1: (1 - e^{-4}) / 2
    h = forcing_term(1.0, DriftOnly(1.0), ExpKill(1.0), IndicatorBall(1.0), np.array([-1.0]))
    assert h[0] == pytest.approx((1 - math.exp(-4.0)) / 2, rel=1e-3)
