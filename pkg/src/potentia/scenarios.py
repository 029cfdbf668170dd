"""Scenario runners: renewal solve, Monte Carlo and asymptotics on one model.

Each runner turns a validated ``ScenarioConfig`` into a ``ComparisonReport``.
Gates carry a category: ``tolerance`` gates compare numbers against each
other, ``validity`` gates guard the numerics themselves (lost kernel mass,
horizon bias).  Two-dimensional models are cross-checked on their first
marginal by the one-dimensional renewal solver, since the kernels are
one-dimensional.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace
from importlib import resources
from typing import Callable

import numpy as np

from . import asymptotics as asy
from .config import (
    ScenarioConfig,
    build_claims,
    build_kill,
    build_law,
    build_payoff,
    build_small,
    load_config,
)
from .heavytail import ComonotoneSplit, Exponential, IndependentProduct, IntegratedTail, TailModel, Univariate
from .kernels import (
    DriftBrownian,
    DriftOnly,
    DriftSmallJumps,
    ExpKill,
    FirstPassageRuin,
    build_kernel,
    decay_rate_fit,
    forcing_term,
    q_function,
    q_measure,
)
from .payoffs import ClaimTail, PowerUtility
from .renewal import Grid, RenewalProblem, discretize, solve_fixed_point, solve_pk_series
from .report import ComparisonReport, Row
from .simulator import (
    RiskProcessSpec,
    estimate_dual_tail,
    estimate_potential_expkill,
    estimate_quadrant_ruin,
    estimate_ruin_1d,
)

FAR = 1e4  # distance at which payoff limits are read off for the outside values


# ---------------------------------------------------------------- problems


def ruin_problem(law: TailModel, intensity: float, drift: float, grid: Grid) -> RenewalProblem:
    """``psi = rho Fbar_I + psi * (rho F_I)`` on ``[0, x_max]``."""
    rho = intensity * law.mean / drift
    ft = IntegratedTail(law)
    return RenewalProblem.from_function(grid, lambda x: rho * ft.tail(x),
                                        discretize(ft, grid, scale=rho), "ruin")


def expkill_problem(intensity: float, law: TailModel, small, mu: float, payoff, grid: Grid,
                    panels: int = 4096, t_max_factor: float = 40.0, tol: float = 1e-7):
    """Potential of a one-dimensional payoff under exponential killing.

    The kernel lattice reaches the full width of the domain on both sides;
    beyond the domain the potential is replaced by ``l(-inf)/mu`` below and
    ``l(+inf)/mu`` above.
    """
    kill = ExpKill(mu)
    span = grid.x_max - grid.x_min
    kgrid = Grid(grid.step, span, -span)
    K = build_kernel(intensity, law, small, kill, kgrid, panels, t_max_factor, tol)
    h = forcing_term(intensity, small, kill, payoff, grid.centers, grid.step)
    ends = np.array([[grid.x_min - FAR], [grid.x_max + FAR]])
    lo, hi = (float(v) / mu for v in payoff(ends))
    return RenewalProblem(grid, h, K.measure, "expkill", (lo, hi)), K


def marginal_small(small, i: int):
    a = [float(small.drift[i])]
    if isinstance(small, DriftBrownian):
        return DriftBrownian(a, small.sigma)
    if isinstance(small, DriftSmallJumps):
        return DriftSmallJumps(a, small.rate, small.jumps)
    return DriftOnly(a)


def exponential_ruin(law: TailModel, intensity: float, drift: float) -> Callable | None:
    """Closed-form ruin probability for exponential claims starting at 0."""
    if not isinstance(law, Exponential) or law.delta != 0:
        return None
    b = law.beta
    return lambda x: intensity / (drift * b) * np.exp(-(b - intensity / drift) * np.asarray(x, dtype=float))


# ---------------------------------------------------------------- shared steps


def _report(cfg: ScenarioConfig) -> ComparisonReport:
    return ComparisonReport(cfg.id, cfg.resolved())


def _starts(cfg: ScenarioConfig, d: int) -> np.ndarray:
    xs = np.asarray(cfg.mc.starts, dtype=float)
    if xs.size == 0:
        return np.zeros((0, d))
    if xs.shape[1] != d:
        raise ValueError(f"starts have dimension {xs.shape[1]}, model has {d}")
    return xs


def _solve(rep: ComparisonReport, prob: RenewalProblem, tol: float, name: str = ""):
    fp = solve_fixed_point(prob, tol)
    pk = solve_pk_series(prob, tol=tol)
    tag = f"_{name}" if name else ""
    rep.solutions[f"fixed_point{tag}"] = fp
    rep.solutions[f"pk_series{tag}"] = pk
    gap = float(np.max(np.abs(fp.u - pk.u)))
    rep.gate(f"solver_agreement{tag}", gap, f"<= {2 * tol:g}", gap <= 2 * tol,
             reason="solver_disagreement", detail=f"fixed point {fp.iterations} it, {pk.method}")
    lost = max(fp.lost_mass, pk.lost_mass)
    rep.gate(f"lost_mass{tag}", lost, f"<= 1e-6 rho = {1e-6 * prob.rho:g}", fp.valid and pk.valid,
             category="validity", reason="lost_mass")
    return fp, pk


def _mc_vs(rep: ComparisonReport, row: Row, est, value: float, k: float, name: str,
           slack: float = 0.0) -> None:
    dev = abs(est.estimate - value)
    ok = dev <= k * est.stderr + slack
    rep.gate(f"{name}@{_xs(est.x)}", dev / est.stderr if est.stderr > 0 else (0.0 if dev == 0 else math.inf),
             f"<= {k:g} sigma" + (f" + {slack:.3g}" if slack else ""), ok, reason="mc_outside_ci")
    if ok:
        row.ok()
    else:
        row.fail("mc_outside_ci")


def _bias(rep: ComparisonReport, cfg: ScenarioConfig, est) -> None:
    if cfg.gates.bias_proxy is None or not math.isfinite(est.bias_proxy):
        return
    rep.gate(f"bias_proxy@{_xs(est.x)}", est.bias_proxy, f"< {cfg.gates.bias_proxy:g}",
             est.bias_proxy < cfg.gates.bias_proxy, category="validity", reason="bias_proxy")


def _xs(x) -> str:
    return ";".join(f"{v:g}" for v in np.atleast_1d(x))


def _path(cfg_path) -> asy.PowerPath:
    powers = None if cfg_path.powers is None else tuple(cfg_path.powers)
    return asy.PowerPath(tuple(cfg_path.coeffs), powers)


def _ladder(cfg: ScenarioConfig) -> tuple[np.ndarray, asy.PowerPath]:
    lad = cfg.ladder
    if lad is None:
        raise ValueError(f"scenario {cfg.id} needs a ladder section")
    return asy.geometric_ladder(lad.start, lad.factor, lad.rungs), _path(lad.path)


# ---------------------------------------------------------------- one-dimensional ruin


def run_ruin_1d(cfg: ScenarioConfig) -> ComparisonReport:
    rep = _report(cfg)
    m = cfg.model
    claims = build_claims(m.claims)
    law = claims.marginal(0)
    lam, a = m.intensity, m.drift[0]
    spec = RiskProcessSpec(lam, claims, build_small(m), FirstPassageRuin(), delta=m.delta, dt=m.dt)
    rho = spec.rho
    fp, _ = _solve(rep, ruin_problem(law, lam, a, Grid(cfg.grid.step, cfg.grid.x_max)), cfg.solver.tol)

    closed = exponential_ruin(law, lam, a)
    if closed is not None:
        err = float(np.max(np.abs(fp.u - closed(fp.x))))
        rep.gate("renewal_vs_closed_form", err, f"< {cfg.gates.closed_form_sup:g}",
                 err < cfg.gates.closed_form_sup, reason="closed_form_mismatch")

    pred = asy.predict_ruin(rho, law)
    rep.notes.append(pred.note)
    rep.notes.extend(pred.flags)

    opts = cfg.ruin
    dual_x = list(opts.dual_starts) if opts else []
    mc_x = sorted(set(_starts(cfg, 1)[:, 0].tolist()) | set(dual_x))
    rows: dict[float, Row] = {}

    def row(x: float) -> Row:
        if x not in rows:
            rows[x] = Row(x, (x,), tail=float(law.tail(x)), prediction=float(pred(np.array([x]))[0]),
                          renewal=float(fp.at(x)),
                          reference=float(closed(x)) if closed is not None else math.nan)
        return rows[x]

    ests = {}
    if mc_x:
        res = estimate_ruin_1d(spec, mc_x, cfg.mc.n_paths, cfg.mc.seed, cfg.mc.horizon, cfg.mc.workers)
        for x, e in zip(mc_x, res):
            ests[x] = e
            rep.estimates.append(("ruin_direct", e))
            r = row(x)
            r.mc, r.mc_stderr = e.estimate, e.stderr
            target = r.reference if closed is not None else r.renewal
            _mc_vs(rep, r, e, target, cfg.gates.sigma,
                   "mc_vs_closed_form" if closed is not None else "mc_vs_renewal",
                   slack=e.bias_proxy * e.estimate)
            _bias(rep, cfg, e)

    if dual_x:
        duals = estimate_dual_tail(law, lam, a, dual_x, cfg.mc.n_paths, cfg.mc.seed)
        for x, d in zip(dual_x, duals):
            rep.estimates.append(("dual_maximum", d))
            e = ests[x]
            sd = math.hypot(e.stderr, d.stderr)
            dev = abs(e.estimate - d.estimate)
            slack = e.bias_proxy * e.estimate
            rep.gate(f"duality@{x:g}", dev / sd, f"<= {cfg.gates.sigma:g} combined sigma"
                     + (f" + {slack:.3g}" if slack else ""),
                     dev <= cfg.gates.sigma * sd + slack, reason="duality_mismatch")

    ladder = list(opts.ladder) if opts else []
    for x in ladder:
        row(float(x))
    if ladder:
        xs = np.asarray(ladder, dtype=float)
        curve = asy.ratio_curve(xs, fp.at(xs), pred(xs))
        if pred.applicable:
            lo, hi = cfg.gates.ratio_low, cfg.gates.ratio_high
            for x, rt in zip(xs, curve.ratio):
                ok = lo <= rt <= hi
                rep.gate(f"asymptotic_ratio@{x:g}", rt, f"in [{lo:g}, {hi:g}]", ok, reason="ratio_out_of_band")
                (rows[float(x)].ok() if ok else rows[float(x)].fail("ratio_out_of_band"))
            if cfg.gates.settle:
                d = curve.distance[-3:]
                rep.gate("asymptotic_settling", float(np.max(np.diff(d))),
                         "|ratio-1| nonincreasing over last 3 rungs", curve.settling(3),
                         reason="ratio_not_settling")
        else:
            rep.notes.append("asymptotic ratio reported without gate")
    rep.rows = [rows[k] for k in sorted(rows)]
    return rep


# ---------------------------------------------------------------- potentials under exponential killing


def _regime_gate(rep: ComparisonReport, cfg: ScenarioConfig, regime: asy.Regime) -> None:
    want = cfg.gates.regime
    if want is not None:
        rep.gate("regime", regime.B, f"class {want}", regime.kind == want,
                 reason="regime_mismatch", detail=f"classified {regime.kind}")


def run_expkill_potential(cfg: ScenarioConfig) -> ComparisonReport:
    rep = _report(cfg)
    m = cfg.model
    claims = build_claims(m.claims)
    d = claims.dimension
    lam, mu = m.intensity, m.kill.mu
    small = build_small(m)
    payoff = build_payoff(cfg.payoff, lam, claims)
    spec = RiskProcessSpec(lam, claims, small, ExpKill(mu), payoff, delta=m.delta, dt=m.dt)
    rho = lam / (lam + mu)
    ts, path = _ladder(cfg)
    lad = cfg.ladder
    regime = asy.classify_regime(payoff, claims, path, start=lad.start, factor=lad.factor, rungs=lad.rungs)
    _regime_gate(rep, cfg, regime)
    rep.tables["regime"] = (["t", "ratio"], [[t, r] for t, r in zip(regime.ladder, regime.ratios)])
    try:
        pred = asy.predict_potential(regime, rho, tail=claims, payoff=payoff, payoff_scale=1.0 / lam)
        rep.notes.append(f"prediction {pred.tag}: {pred.note}")
    except asy.InconclusiveError as err:
        pred = None
        rep.notes.append(str(err))

    # first marginal through the renewal solver
    law = claims.marginal(0)
    grid = Grid(cfg.grid.step, cfg.grid.x_max, cfg.grid.x_min)
    q = cfg.quadrature
    prob, K = expkill_problem(lam, law, marginal_small(small, 0), mu, payoff, grid,
                              q.panels, q.t_max_factor, q.tol)
    rep.kernel = K
    fp, _ = _solve(rep, prob, cfg.solver.tol)
    one_d = d == 1

    rows: list[Row] = []
    for t, x in zip(ts, path(ts)):
        r = Row(float(t), tuple(x.tolist()), tail=float(claims.joint_tail(x[None, :])[0]), series="ladder")
        if pred is not None and pred.quantitative:
            r.prediction = float(pred(x[None, :])[0])
        if one_d:
            r.renewal = float(fp.at(x[0]))
        rows.append(r)

    starts = _starts(cfg, d)
    bound = payoff.sup / mu
    mc_rows = []
    if starts.size:
        ests = estimate_potential_expkill(spec, starts, cfg.mc.n_paths, cfg.mc.seed, cfg.mc.workers)
        for x, e in zip(starts, ests):
            rep.estimates.append(("potential", e))
            r = Row(math.nan, tuple(x.tolist()), tail=float(claims.joint_tail(x[None, :])[0]),
                    mc=e.estimate, mc_stderr=e.stderr, series="mc")
            r.t = float(x[0]) if one_d else float(np.min(x))
            if pred is not None and pred.quantitative:
                r.prediction = float(pred(x[None, :])[0])
            ok = e.estimate <= bound + cfg.gates.sigma * e.stderr
            rep.gate(f"bound@{_xs(x)}", e.estimate, f"<= sup l / mu = {bound:g} + {cfg.gates.sigma:g} sigma",
                     ok, reason="bound_exceeded")
            if one_d:
                r.renewal = float(fp.at(x[0]))
                _mc_vs(rep, r, e, r.renewal, cfg.gates.sigma, "mc_vs_renewal")
            mc_rows.append(r)

    if regime.kind == asy.ZERO:
        vals = np.array([r.renewal / r.tail if one_d else math.nan for r in rows])
        src = "renewal"
        if not one_d:
            vals = np.array([r.mc / r.tail for r in mc_rows])
            src = "mc"
        diffs = np.diff(vals)
        ok = bool(vals.size >= 2 and np.all(diffs < 0))
        rep.gate("tail_ratio_strictly_decreasing", float(np.max(diffs)) if diffs.size else math.nan,
                 f"{src} u/Fbar strictly decreasing", ok, reason="ratio_not_decreasing")
    elif pred is not None and pred.quantitative:
        if mc_rows:
            last = mc_rows[-1]
            src, value = "mc", last.mc / last.prediction
        else:
            src, value = "renewal", rows[-1].renewal / rows[-1].prediction
        ok = abs(value - 1.0) < cfg.gates.limit_rtol
        rep.gate("limit_at_top_rung", value, f"{src}/prediction within {cfg.gates.limit_rtol:g} of 1", ok,
                 reason="limit_mismatch")
        (mc_rows[-1] if mc_rows else rows[-1]).ok() if ok else (mc_rows[-1] if mc_rows else rows[-1]).fail(
            "limit_mismatch")
    rep.rows = rows + mc_rows
    return rep


# ---------------------------------------------------------------- two-dimensional tails


def _marginal_claim_tail_check(rep: ComparisonReport, cfg: ScenarioConfig, claims, xs) -> None:
    """ExpKill potential of ``lam Fbar_1`` on the first marginal: renewal against Monte Carlo."""
    m = cfg.model
    lam, mu = m.intensity, m.kill.mu
    law = claims.marginal(0)
    uni = Univariate(law)
    small = marginal_small(build_small(m), 0)
    payoff = ClaimTail(lam, uni)
    grid = Grid(cfg.grid.step, cfg.grid.x_max, cfg.grid.x_min)
    q = cfg.quadrature
    prob, K = expkill_problem(lam, law, small, mu, payoff, grid, q.panels, q.t_max_factor, q.tol)
    rep.kernel = K
    fp, _ = _solve(rep, prob, cfg.solver.tol, "marginal")
    if len(xs):
        spec = RiskProcessSpec(lam, uni, small, ExpKill(mu), payoff, delta=m.delta, dt=m.dt)
        ests = estimate_potential_expkill(spec, [[x] for x in xs], cfg.mc.n_paths, cfg.mc.seed, cfg.mc.workers)
        for x, e in zip(xs, ests):
            rep.estimates.append(("marginal_potential", e))
            r = Row(float(x), (float(x),), tail=float(law.tail(x)), renewal=float(fp.at(x)),
                    mc=e.estimate, mc_stderr=e.stderr, series="marginal")
            _mc_vs(rep, r, e, r.renewal, cfg.gates.sigma, "marginal_mc_vs_renewal")
            rep.rows.append(r)


def run_twod_tail(cfg: ScenarioConfig) -> ComparisonReport:
    rep = _report(cfg)
    claims = build_claims(cfg.model.claims)
    if claims.dimension != 2:
        raise ValueError("two-dimensional tail scenarios need d = 2")
    opts = cfg.twod
    if opts is None or not opts.paths:
        raise ValueError(f"scenario {cfg.id} needs twod.paths")
    table = []
    case_ladder = asy.geometric_ladder(1.0, 2.0, opts.rungs)
    for pc in opts.paths:
        path = _path(pc)
        if isinstance(claims, IndependentProduct):
            pred = asy.predict_2d_product(claims.laws[0], claims.laws[1], path, case_ladder)
        elif isinstance(claims, ComonotoneSplit):
            share = pc.share if pc.share is not None else claims.proportions[0]
            use = claims if pc.share is None else ComonotoneSplit(claims.driver, (share, 1.0 - share))
            pred = asy.predict_comonotone(claims.driver, share, path, case_ladder)
        else:
            raise ValueError("two-dimensional tail scenarios need product or comonotone claims")
        model = claims if isinstance(claims, IndependentProduct) else use
        label = pc.label or pred.case
        ts = asy.geometric_ladder(1.0, 2.0, int(round(math.log2(opts.probe))) + 1)
        for t, x in zip(ts, path(ts)):
            jt = float(model.joint_tail(x[None, :])[0])
            rep.rows.append(Row(float(t), tuple(x.tolist()), tail=jt,
                                prediction=float(pred(x[None, :])[0]), series=label))
        x = path(np.array([opts.probe]))
        jt = float(model.joint_tail(x)[0])
        ratio = float(pred(x)[0]) / jt if pred.quantitative else math.nan
        ok = pred.quantitative and abs(ratio - 1.0) <= cfg.gates.tail_rtol
        rep.gate(f"tail_prediction[{label}]", ratio, f"within {cfg.gates.tail_rtol:g} of joint tail", ok,
                 reason="inconclusive" if not pred.quantitative else "tail_mismatch",
                 detail=f"case {pred.case}" + (f"; {'; '.join(pred.flags)}" if pred.flags else ""))
        rep.rows[-1].ok() if ok else rep.rows[-1].fail("tail_mismatch")
        table.append([label, pred.case, "|".join(pred.flags), opts.probe, ratio])
    rep.tables["cases"] = (["path", "case", "flags", "probe", "ratio"], table)
    _marginal_claim_tail_check(rep, cfg, claims, opts.marginal_starts)
    return rep


# ---------------------------------------------------------------- quadrant ruin


def _marginal_ruin(rep: ComparisonReport, cfg: ScenarioConfig, claims, drift) -> list:
    out = []
    for i in range(claims.dimension):
        law = claims.marginal(i)
        grid = Grid(cfg.grid.step, cfg.grid.x_max)
        fp, _ = _solve(rep, ruin_problem(law, cfg.model.intensity, drift[i], grid), cfg.solver.tol,
                       f"marginal{i + 1}")
        out.append(fp)
    return out


def _quadrant_block(rep: ComparisonReport, cfg: ScenarioConfig, spec, starts, series: str,
                    predict: Callable | None, marginals) -> list[Row]:
    res = estimate_quadrant_ruin(spec, starts, cfg.mc.n_paths, cfg.mc.seed, cfg.mc.horizon, cfg.mc.workers)
    rows = []
    for x, q in zip(starts, res):
        rep.estimates.append(("quadrant_direct", q.direct))
        rep.estimates.append(("quadrant_compensation", q.compensation))
        r = Row(float(np.min(x)), tuple(x.tolist()), tail=float(spec.claims.joint_tail(x[None, :])[0]),
                mc=q.direct.estimate, mc_stderr=q.direct.stderr, reference=q.compensation.estimate,
                series=series)
        if predict is not None:
            r.prediction = predict(x)
        r.renewal = max(float(sol.at(xi)) for sol, xi in zip(marginals, x))
        ok = q.agree(cfg.gates.sigma)
        rep.gate(f"compensation_identity@{_xs(x)}", abs(q.z), f"<= {cfg.gates.sigma:g} combined sigma", ok,
                 reason="compensation_mismatch",
                 detail=f"paired stderr {q.paired_stderr:.3g}, late-ruin fraction {q.direct.bias_proxy:.3g}")
        r.ok() if ok else r.fail("compensation_mismatch")
        _bias(rep, cfg, q.direct)
        rows.append(r)
    return rows


def _quadrant_spec(cfg: ScenarioConfig):
    m = cfg.model
    claims = build_claims(m.claims)
    if claims.dimension < 2:
        raise ValueError("quadrant ruin needs d >= 2")
    spec = RiskProcessSpec(m.intensity, claims, build_small(m), build_kill(m.kill), delta=m.delta, dt=m.dt)
    return spec, claims


def _fkp(claims, cfg: ScenarioConfig, per_share: bool) -> Callable | None:
    if not (isinstance(claims, ComonotoneSplit) and claims.dimension == 2):
        return None
    a1, a2 = cfg.model.drift
    share = claims.proportions[0]
    return lambda x: asy.predict_prop_reinsurance(claims.driver, a1, a2, cfg.model.intensity, share,
                                                  x, per_share).value


def run_quadrant_ruin(cfg: ScenarioConfig) -> ComparisonReport:
    rep = _report(cfg)
    spec, claims = _quadrant_spec(cfg)
    marg = _marginal_ruin(rep, cfg, claims, cfg.model.drift)
    rep.notes.append("renewal column: max of the one-dimensional marginal ruin probabilities")
    rep.notes.append("reference column: compensation estimator on the same paths")
    starts = _starts(cfg, claims.dimension)
    rep.rows = _quadrant_block(rep, cfg, spec, starts, "starts", _fkp(claims, cfg, True), marg)
    return rep


def run_prop_reinsurance(cfg: ScenarioConfig) -> ComparisonReport:
    rep = _report(cfg)
    m = cfg.model
    opts = cfg.reinsurance
    if opts is None:
        raise ValueError(f"scenario {cfg.id} needs a reinsurance section")
    claims_cfg = m.claims
    if claims_cfg.structure != "comonotone":
        raise ValueError("proportional reinsurance needs comonotone claims")
    driver = build_law(claims_cfg.driver)
    claims = ComonotoneSplit(driver, (opts.share, 1.0 - opts.share))
    spec = RiskProcessSpec(m.intensity, claims, build_small(m), build_kill(m.kill), delta=m.delta, dt=m.dt)
    chk = asy.strong_subexp_check(driver, opts.strong_probes)
    for b, r in zip(chk.probes, chk.ratios):
        rep.gate(f"strong_subexponential@{b:g}", float(r), f"within {chk.tol:g} of 1",
                 abs(r - 1.0) <= chk.tol, reason="not_strong_subexponential")
    a1, a2 = m.drift
    ts, path = _ladder(cfg)
    xs = path(ts)
    preds = [asy.predict_prop_reinsurance(driver, a1, a2, m.intensity, opts.share, x, opts.per_share)
             for x in xs]
    vals = np.array([p.value for p in preds])
    rep.gate("prediction_decreasing", float(np.max(np.diff(vals))), "strictly decreasing along the ladder",
             bool(np.all(np.diff(vals) < 0)), reason="prediction_not_decreasing")
    err = max(p.error for p in preds)
    rel = max(p.error / p.value for p in preds)
    rep.gate("prediction_quadrature", rel, "relative gap to adaptive quadrature < 1e-6", rel < 1e-6,
             reason="quadrature_gap", detail=f"absolute {err:.3g}")
    if not all(p.case_holds for p in preds):
        rep.notes.append("ladder leaves the a1 > a2, x1 < x2 case for some rungs")
    rep.tables["prediction"] = (["t", "x1", "x2", "value", "error", "c1", "c2", "crossing"],
                                [[t, x[0], x[1], p.value, p.error, p.slopes[0], p.slopes[1], p.crossing]
                                 for t, x, p in zip(ts, xs, preds)])
    marg = _marginal_ruin(rep, cfg, claims, m.drift)
    starts = _starts(cfg, 2)
    if starts.size == 0:
        starts = xs
    lookup = {tuple(x.tolist()): p.value for x, p in zip(xs, preds)}

    def predict(x):
        key = tuple(x.tolist())
        if key in lookup:
            return lookup[key]
        return asy.predict_prop_reinsurance(driver, a1, a2, m.intensity, opts.share, x, opts.per_share).value
    rep.rows = _quadrant_block(rep, cfg, spec, starts, "ladder", predict, marg)
    for r in rep.rows:
        r.t = float(r.x[0])
    rep.notes.append("ratio_mc_prediction is reported without a gate")
    return rep


# ---------------------------------------------------------------- consumption utility


def run_consumption_utility(cfg: ScenarioConfig) -> ComparisonReport:
    rep = _report(cfg)
    m = cfg.model
    claims = build_claims(m.claims)
    d = claims.dimension
    lam, q = m.intensity, m.kill.mu
    small = build_small(m)
    payoff = build_payoff(cfg.payoff, lam, claims)
    if not isinstance(payoff, PowerUtility):
        raise ValueError("consumption utility needs a power_utility payoff without scaling")
    ts, path = _ladder(cfg)
    lad = cfg.ladder
    regime = asy.classify_regime(payoff, claims, path, start=lad.start, factor=lad.factor, rungs=lad.rungs)
    _regime_gate(rep, cfg, regime)
    rep.tables["regime"] = (["t", "ratio"], [[t, r] for t, r in zip(regime.ladder, regime.ratios)])
    rep.notes.append("u/Fbar along the ladder is reported without a gate")

    starts = _starts(cfg, d)
    if starts.size:
        spec = RiskProcessSpec(lam, claims, small, ExpKill(q), payoff, delta=m.delta, dt=m.dt)
        ests = estimate_potential_expkill(spec, starts, cfg.mc.n_paths, cfg.mc.seed, cfg.mc.workers)
        for x, e in zip(starts, ests):
            rep.estimates.append(("potential", e))
            rep.rows.append(Row(float(np.min(x)), tuple(x.tolist()), tail=float(claims.joint_tail(x[None, :])[0]),
                                mc=e.estimate, mc_stderr=e.stderr, series="utility"))
            ok = e.estimate <= payoff.sup / q + cfg.gates.sigma * e.stderr
            rep.gate(f"bound@{_xs(x)}", e.estimate, f"<= cap / q = {payoff.sup / q:g} + {cfg.gates.sigma:g} sigma",
                     ok, reason="bound_exceeded")

    # first coordinate alone: same utility with the whole weight on one asset
    law = claims.marginal(0)
    one = PowerUtility(payoff.alpha, (payoff.proportions[0],), payoff.withdrawal, payoff.cap)
    small1 = marginal_small(small, 0)
    grid = Grid(cfg.grid.step, cfg.grid.x_max, cfg.grid.x_min)
    qd = cfg.quadrature
    prob, K = expkill_problem(lam, law, small1, q, one, grid, qd.panels, qd.t_max_factor, qd.tol)
    rep.kernel = K
    fp, _ = _solve(rep, prob, cfg.solver.tol, "marginal")
    xs = cfg.utility.marginal_starts if cfg.utility else []
    if xs:
        spec1 = RiskProcessSpec(lam, Univariate(law), small1, ExpKill(q), one, delta=m.delta, dt=m.dt)
        ests = estimate_potential_expkill(spec1, [[x] for x in xs], cfg.mc.n_paths, cfg.mc.seed, cfg.mc.workers)
        for x, e in zip(xs, ests):
            rep.estimates.append(("marginal_potential", e))
            r = Row(float(x), (float(x),), tail=float(law.tail(x)), renewal=float(fp.at(x)),
                    mc=e.estimate, mc_stderr=e.stderr, series="marginal")
            _mc_vs(rep, r, e, r.renewal, cfg.gates.sigma, "marginal_mc_vs_renewal")
            rep.rows.append(r)
    return rep


# ---------------------------------------------------------------- kernel decay


def run_kernel_decay(cfg: ScenarioConfig) -> ComparisonReport:
    rep = _report(cfg)
    m = cfg.model
    small = build_small(m)
    if not isinstance(small, DriftBrownian) or small.sigma <= 0:
        raise ValueError("kernel decay probe needs a Brownian small component")
    lam, mu = m.intensity, m.kill.mu
    kill = ExpKill(mu)
    a, s2 = float(small.drift[0]), small.sigma ** 2
    opts = cfg.decay
    window = opts.window if opts else (2.0, 12.0)

    def exact_rate(lm: float) -> float:
        return (math.sqrt(a * a + 2.0 * (lm + mu) * s2) - a) / s2

    w = np.linspace(window[0], window[1], 200)
    fit = decay_rate_fit(w, q_function(lam, small, kill, w), window, exact_rate(lam))
    err = abs(fit.theta / exact_rate(lam) - 1.0)
    rep.gate("decay_rate", fit.theta, f"within {cfg.gates.decay_rtol:g} of {exact_rate(lam):.6g}",
             err <= cfg.gates.decay_rtol, reason="decay_rate_mismatch")
    lams = opts.lambdas if opts else [lam]
    thetas = []
    for lm in lams:
        f = decay_rate_fit(w, q_function(lm, small, kill, w), window, exact_rate(lm))
        thetas.append(f.theta)
    inc = bool(np.all(np.diff(thetas) > 0))
    rep.gate("decay_rate_increasing_in_lambda", float(np.min(np.diff(thetas))) if len(thetas) > 1 else math.nan,
             "strictly increasing", inc, reason="decay_not_monotone")
    rep.tables["decay"] = (["lambda", "theta_fit", "theta_exact"],
                           [[lm, th, exact_rate(lm)] for lm, th in zip(lams, thetas)])
    rep.tables["q_ray"] = (["w", "q"], [[wi, qi] for wi, qi in zip(w, q_function(lam, small, kill, w))])

    rho = lam / (lam + mu)
    Q = q_measure(lam, small, kill, cfg.grid.step)
    qerr = abs(Q.mass - rho)
    rep.gate("q_mass", qerr, f"< {cfg.gates.mass_tol:g}", qerr < cfg.gates.mass_tol, reason="q_mass")

    claims_laws = [build_law(c) for c in (opts.mass_claims if opts else [])]
    pairs = opts.mass_pairs if opts else []
    mass_rows = []
    kgrid = Grid(cfg.grid.step, cfg.grid.x_max, -cfg.grid.x_max)
    drift_a = abs(a) if a != 0 else 1.0
    for lm, mm in pairs:
        for law in claims_laws:
            K = build_kernel(lm, law, DriftOnly([drift_a]), ExpKill(mm), kgrid,
                             cfg.quadrature.panels, cfg.quadrature.t_max_factor, cfg.quadrature.tol)
            mass_rows.append([lm, mm, repr(law), K.measure.mass, abs(K.measure.mass - lm / (lm + mm))])
    if mass_rows:
        worst = max(r[-1] for r in mass_rows)
        rep.gate("kernel_mass", worst, f"< {cfg.gates.mass_tol:g} over {len(mass_rows)} kernels",
                 worst < cfg.gates.mass_tol, reason="kernel_mass")
    rep.tables["kernel_mass"] = (["lambda", "mu", "claim", "mass", "error"], mass_rows)

    claims = build_claims(m.claims)
    _marginal_claim_tail_check(rep, cfg, claims, [float(x[0]) for x in _starts(cfg, 1)])
    return rep


# ---------------------------------------------------------------- dispatch


RUNNERS: dict[str, Callable[[ScenarioConfig], ComparisonReport]] = {
    "ruin_1d": run_ruin_1d,
    "expkill_potential": run_expkill_potential,
    "twod_tail": run_twod_tail,
    "quadrant_ruin": run_quadrant_ruin,
    "prop_reinsurance": run_prop_reinsurance,
    "consumption_utility": run_consumption_utility,
    "kernel_decay": run_kernel_decay,
}

BUILTINS = (
    "cramer_lundberg_exp",
    "cramer_lundberg_pareto",
    "expkill_indicator_ball",
    "expkill_indicator_quadrant",
    "twod_product",
    "twod_comonotone",
    "quadrant_ruin_2d",
    "prop_reinsurance",
    "consumption_utility",
    "kernel_decay_probe",
)


def list_scenarios() -> list[tuple[str, str]]:
    out = []
    for sid in BUILTINS:
        out.append((sid, builtin_config(sid).description))
    return out


def builtin_config(sid: str) -> ScenarioConfig:
    if sid not in BUILTINS:
        raise KeyError(f"no builtin scenario {sid!r}")
    ref = resources.files("potentia") / "builtin" / f"{sid}.yaml"
    with resources.as_file(ref) as path:
        return load_config(path)


def run_scenario(cfg: ScenarioConfig) -> ComparisonReport:
    t0 = time.perf_counter()
    rep = RUNNERS[cfg.kind](cfg)
    rep.notes.append(f"runtime {time.perf_counter() - t0:.1f} s")
    return rep


__all__ = ["run_scenario", "list_scenarios", "builtin_config", "ruin_problem", "expkill_problem",
           "exponential_ruin", "marginal_small", "RUNNERS", "BUILTINS"]
