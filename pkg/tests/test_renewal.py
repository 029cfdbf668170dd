import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from potentia.heavytail import Exponential, IntegratedTail, Pareto
from potentia.renewal import (
    Grid,
    GridMeasure,
    GridMismatchError,
    RenewalProblem,
    convolution_power,
    convolution_powers,
    convolve,
    discretize,
    iterate_state_dependent,
    kesten_check,
    neumann_sum,
    point_mass,
    solve_fixed_point,
    solve_pk_series,
)
from potentia.scenarios import ruin_problem


@pytest.fixture(scope="module")
def exp_ruin():
    return ruin_problem(Exponential(1.0), 1.0, 2.0, Grid(0.01, 40.0))


def closed_ruin(x):
    return 0.5 * np.exp(-0.5 * np.asarray(x))


# ---------------------------------------------------------------- grids and measures


def test_grid_counts():
    g = Grid(0.5, 10.0)
    assert g.n == 21
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 10.0
    with pytest.raises(ValueError):
        Grid(0.3, 1.0)


def test_convolve_identity():
    g = Grid(0.01, 20.0)
    e = discretize(Exponential(1.0), g)
    out = convolve(point_mass(g, 0.0), e)
    assert np.array_equal(out.dense(), e.dense())


def test_convolve_atoms():
    g = Grid(0.5, 10.0)
    out = convolve(point_mass(g, 1.0), point_mass(g, 2.0))
    assert out.atoms == ((3.0, 1.0),)
    assert out.weights.sum() == 0.0


def test_convolve_gamma_density():
    g = Grid(0.01, 20.0)
    e = discretize(Exponential(1.0), g)
    dens = convolve(e, e).dense()[1:] / g.step
    x = g.nodes[1:]
    assert np.max(np.abs(dens - x * np.exp(-x))) < 1e-3


def test_convolve_grid_mismatch():
    a = discretize(Exponential(1.0), Grid(0.01, 5.0))
    b = discretize(Exponential(1.0), Grid(0.02, 5.0))
    with pytest.raises(GridMismatchError):
        convolve(a, b)


@given(s1=st.floats(0.05, 1.0), s2=st.floats(0.05, 1.0), beta=st.floats(0.05, 5.0))
@settings(max_examples=30, deadline=None)
def test_convolution_mass_is_product(s1, s2, beta):
    g = Grid(0.1, 30.0)
    a = discretize(Exponential(beta), g, scale=s1)
    b = discretize(Pareto(1.0), g, scale=s2)
    c = convolve(a, b)
    assert c.mass == pytest.approx(s1 * s2, abs=1e-8)
    assert np.all(c.weights >= 0)


def test_convolution_power_zero_and_one():
    g = Grid(0.1, 10.0)
    m = discretize(Exponential(1.0), g, 0.5)
    p0 = convolution_power(m, 0)
    assert p0.atoms == ((0.0, 1.0),)
    p1 = convolution_power(m, 1)
    assert np.array_equal(p1.dense(), m.dense())
    assert convolution_power(m, 4).mass == pytest.approx(0.5 ** 4, abs=1e-10)


def test_pareto_convolution_tail_matches_quadrature():
    # P(U1+U2 > x) for tail z^-2 at x = 50, 200 (mpmath quadrature, 30 digits)
    g = Grid(0.05, 400.0)
    m2 = convolve(discretize(Pareto(1.0), g), discretize(Pareto(1.0), g))
    assert m2.tail(50.0) == pytest.approx(8.70819233747883e-4, rel=1e-4)
    assert m2.tail(200.0) == pytest.approx(5.10371872233714e-5, rel=1e-4)


def test_convolution_tail_limits():
    g = Grid(0.25, 2000.0)
    law = Pareto(1.0)
    pw = convolution_powers(discretize(law, g), 3)
    x = 1000.0
    for n in (1, 2, 3):
        assert abs(pw[n].tail(x) / law.tail(x) - n) < 0.15 * n


# ---------------------------------------------------------------- Neumann sum


def test_neumann_zero_terms():
    m = discretize(Exponential(1.0), Grid(0.1, 10.0), 0.5)
    ns = neumann_sum(m, 0)
    assert ns.measure.atoms == ((0.0, 0.5),)
    assert ns.measure.mass == pytest.approx(0.5)


def test_neumann_mass_bound():
    m = discretize(Exponential(1.0), Grid(0.1, 200.0), 0.6)
    for n in (2, 5, 20):
        ns = neumann_sum(m, n)
        assert 1.0 - ns.measure.mass <= ns.truncation_bound + 1e-12
        assert ns.truncation_bound == pytest.approx(0.6 ** (n + 1) / 0.4)


def test_neumann_rejects_rho_one():
    m = discretize(Exponential(1.0), Grid(0.1, 10.0))
    with pytest.raises(ValueError):
        neumann_sum(m, 3)


def test_neumann_tail_constant():
    g = Grid(0.25, 2000.0)
    law = Pareto(1.0)
    m = discretize(law, g)
    ns = neumann_sum(m.scaled(0.5), 60)
    assert ns.measure.tail(1000.0) / law.tail(1000.0) == pytest.approx(1.0, rel=0.1)


# ---------------------------------------------------------------- solvers


def test_fixed_point_matches_closed_form(exp_ruin):
    sol = solve_fixed_point(exp_ruin, 1e-10)
    assert np.max(np.abs(sol.u - closed_ruin(sol.x))) < 1e-3
    assert sol.at(2.0) == pytest.approx(0.18394, abs=1e-4)
    assert sol.at(0.0) == pytest.approx(0.5, abs=1e-4)
    assert sol.residual <= 1e-10
    assert sol.valid


def test_solvers_agree(exp_ruin):
    fp = solve_fixed_point(exp_ruin, 1e-10)
    pk = solve_pk_series(exp_ruin, tol=1e-10)
    assert np.max(np.abs(fp.u - pk.u)) <= 2e-10
    assert pk.truncation_bound <= 1e-10


def test_contraction_trace(exp_ruin):
    sol = solve_fixed_point(exp_ruin, 1e-10)
    tr = np.asarray(sol.trace)
    assert np.all(tr[1:] <= exp_ruin.rho * tr[:-1] * (1 + 1e-6))
    cap = math.ceil(math.log(1e-10 * 0.5 / exp_ruin.h.max()) / math.log(0.5)) + 50
    assert sol.iterations <= cap


def test_bound_and_positivity(exp_ruin):
    sol = solve_fixed_point(exp_ruin, 1e-10)
    assert np.all(sol.u >= 0)
    assert sol.u.max() <= exp_ruin.h.max() / (1 - exp_ruin.rho) + 1e-10


def test_zero_forcing_gives_zero():
    g = Grid(0.05, 10.0)
    k = discretize(Exponential(1.0), g, 0.5)
    p = RenewalProblem.from_function(g, lambda x: np.zeros_like(x), k, "zero")
    assert np.all(solve_fixed_point(p).u == 0.0)
    assert np.all(solve_pk_series(p).u == 0.0)


def test_pk_zero_terms_is_h(exp_ruin):
    sol = solve_pk_series(exp_ruin, n_terms=0)
    assert np.array_equal(sol.u, exp_ruin.h)


def test_pk_high_rho_truncation():
    g = Grid(0.1, 400.0)
    law = Exponential(1.0)
    p = ruin_problem(law, 0.9, 1.0, g)
    sol = solve_pk_series(p, tol=1e-8)
    assert sol.truncation_bound <= 1e-8


def test_grid_refinement(exp_ruin):
    coarse = solve_fixed_point(ruin_problem(Exponential(1.0), 1.0, 2.0, Grid(0.02, 40.0)))
    fine = solve_fixed_point(exp_ruin)
    xs = np.linspace(0.5, 30, 60)
    assert np.max(np.abs(coarse.at(xs) - fine.at(xs))) < 4 * 0.02


def test_lost_mass_flags_invalid():
    # kernel grid shorter than the domain: mass past its end is booked, not dropped
    dom = Grid(0.05, 20.0)
    k = discretize(IntegratedTail(Pareto(1.0)), Grid(0.05, 5.0), 0.5)
    p = RenewalProblem.from_function(dom, lambda x: 0.5 * IntegratedTail(Pareto(1.0)).tail(x), k)
    sol = solve_fixed_point(p)
    assert sol.lost_mass == pytest.approx(0.5 / 10.0)
    assert not sol.valid
    # the same kernel reaching across the whole domain loses nothing
    full = ruin_problem(Pareto(1.0), 1.0, 4.0, dom)
    assert solve_fixed_point(full).valid


def test_solution_csv_header(exp_ruin):
    text = solve_fixed_point(exp_ruin).to_csv({"scenario": "t"})
    lines = text.splitlines()
    assert lines[0] == "# potentia-csv v1"
    assert lines[2] == "x,u,h,residual_contribution"


def test_state_dependent_oracle_reduces_to_translation_invariant():
    g = Grid(0.5, 20.0)
    k = discretize(Exponential(1.0), g, 0.5)
    p = RenewalProblem.from_function(g, lambda x: 0.5 * np.exp(-0.5 * x), k, "ti")
    pts = p.x
    dense = k.dense()

    def row(x):
        # mass sent from x to each point: kernel weight at x - x_j
        idx = np.rint((x - pts) / g.step).astype(int)
        out = np.zeros(pts.size)
        ok = (idx >= 0) & (idx < dense.size)
        out[ok] = dense[idx[ok]]
        return out

    brute = iterate_state_dependent(pts, p.h, row, 200)
    assert np.max(np.abs(brute - solve_fixed_point(p).u)) < 1e-8


# ---------------------------------------------------------------- Kesten


def test_kesten_pareto_no_violation():
    law = Pareto(1.0)
    g = Grid(0.25, 2000.0)
    rep = kesten_check(discretize(law, g), 5, 0.2)
    assert not rep.violation and not rep.light_tail
    assert math.isfinite(rep.C)
    assert rep.constants[0] >= rep.sup_ratio_n1 / (1.2) - 1e-12


def test_kesten_exponential_light_tail():
    g = Grid(0.05, 60.0)
    rep = kesten_check(discretize(Exponential(1.0), g), 5, 0.2)
    assert rep.light_tail
    assert "light-tail" in rep.note


def test_kesten_needs_normalized():
    with pytest.raises(ValueError):
        kesten_check(discretize(Exponential(1.0), Grid(0.1, 10.0), 0.5))


def test_integrated_tail_kernel_mass():
    g = Grid(0.05, 400.0)
    m = discretize(IntegratedTail(Pareto(1.0)), g, 0.5)
    assert isinstance(m, GridMeasure)
    assert m.mass == pytest.approx(0.5, abs=1e-12)
