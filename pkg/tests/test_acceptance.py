"""Acceptance criteria AC1-AC10, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py`` (the lines appear in the
terminal summary) or directly as ``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from potentia.heavytail import Exponential, Pareto, Weibull
from potentia.kernels import DriftOnly, ExpKill, build_kernel
from potentia.plotting import emit_plots
from potentia.renewal import Grid, convolution_powers, discretize, kesten_check, neumann_sum
from potentia.report import render, write_report
from potentia.scenarios import BUILTINS, builtin_config, run_scenario
from potentia.simulator import CHUNK


def gates(rep, prefix):
    return [g for g in rep.gates if g.name.startswith(prefix)]


def estimates(rep, kind):
    return {e.x[0]: e for label, e in rep.estimates if e.kind == kind}


def test_ac1_exponential_oracle(builtin_runs, record_ac):
    rep, secs = builtin_runs["cramer_lundberg_exp"]
    (sup,) = gates(rep, "renewal_vs_closed_form")
    mc = estimates(rep, "ruin_direct")
    z = {x: abs(e.estimate - 0.5 * math.exp(-0.5 * x)) / e.stderr for x, e in mc.items()}
    bias = max(e.bias_proxy for e in mc.values())
    ok = (sup.value < 1e-3 and sorted(mc) == [0.0, 1.0, 2.0, 4.0]
          and all(e.n_paths == 1_000_000 for e in mc.values())
          and max(z.values()) <= 3.0 and bias < 0.02 and secs < 60)
    record_ac("AC1", ok, f"sup error {sup.value:.2e}, max |z| {max(z.values()):.2f}, "
                         f"max bias proxy {bias:.2%}, {secs:.1f} s")
    assert ok


def test_ac2_subexponential_ratio(builtin_runs, record_ac):
    rep, secs = builtin_runs["cramer_lundberg_pareto"]
    ratios = {float(g.name.split("@")[1]): g.value for g in gates(rep, "asymptotic_ratio@")}
    xs = sorted(ratios)
    dist = [abs(ratios[x] - 1.0) for x in xs]
    ok = (xs == [25.0, 50.0, 100.0, 200.0] and all(0.7 <= r <= 1.3 for r in ratios.values())
          and all(b <= a for a, b in zip(dist[-3:], dist[-2:])) and secs < 120)
    shown = ", ".join(f"{x:g}: {ratios[x]:.3f}" for x in xs)
    record_ac("AC2", ok, f"ratios {shown}, {secs:.1f} s")
    assert ok


def test_ac3_kernel_mass(record_ac):
    pairs = [(0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, 0.5), (1.0, 2.0), (4.0, 3.0)]
    laws = [Pareto(1.0), Exponential(1.0), Weibull(0.5)]
    worst = 0.0
    for lam, mu in pairs:
        for law in laws:
            K = build_kernel(lam, law, DriftOnly(1.0), ExpKill(mu), Grid(0.05, 80.0, -80.0))
            worst = max(worst, abs(K.mass - lam / (lam + mu)))
    ok = worst < 1e-6
    record_ac("AC3", ok, f"max |mass - lam/(lam+mu)| {worst:.1e} over 18 kernels")
    assert ok


def test_ac4_convolution_tails(record_ac):
    g = Grid(0.25, 2000.0)
    law = Pareto(1.0)
    m = discretize(law, g)
    x = 1000.0
    pw = convolution_powers(m, 3)
    ratios = [pw[n].tail(x) / law.tail(x) for n in (1, 2, 3)]
    rep = kesten_check(m, 5, 0.2)
    ok = all(abs(r - n) < 0.15 * n for n, r in zip((1, 2, 3), ratios)) and not rep.violation
    record_ac("AC4", ok, "tail ratios at x=1000: " + ", ".join(f"{r:.4f}" for r in ratios)
              + f"; Kesten violation {rep.violation}")
    assert ok


def test_ac5_neumann_tail_constant(record_ac):
    g = Grid(0.25, 2000.0)
    law = Pareto(1.0)
    m = discretize(law, g)
    x = 1000.0
    rel = {}
    for rho in (0.3, 0.5, 0.7):
        ns = neumann_sum(m.scaled(rho), 80)
        rel[rho] = ns.measure.tail(x) / law.tail(x) / (rho / (1 - rho))
    ok = all(abs(v - 1.0) < 0.10 for v in rel.values())
    record_ac("AC5", ok, "tail / (rho/(1-rho) Fbar) at x=1000: "
              + ", ".join(f"rho {r}: {v:.4f}" for r, v in rel.items()))
    assert ok


def test_ac6_regime_examples(builtin_runs, record_ac):
    quad = builtin_runs["expkill_indicator_quadrant"][0]
    top = max((r for r in quad.rows if r.series == "mc"), key=lambda r: r.t)
    cfg = quad.config["model"]
    target = cfg["intensity"] / cfg["kill"]["mu"]
    quad_ok = abs(top.mc / target - 1.0) <= 0.05
    ball = builtin_runs["expkill_indicator_ball"][0]
    (dec,) = gates(ball, "tail_ratio_strictly_decreasing")
    (util,) = gates(builtin_runs["consumption_utility"][0], "regime")
    ok = quad_ok and dec.passed and util.detail == "classified zero"
    record_ac("AC6", ok, f"quadrant u at t={top.t:g}: {top.mc:.4f} vs lam/mu {target:g}; "
                         f"ball u/Fbar strictly decreasing {dec.passed}; utility {util.detail}")
    assert ok


def test_ac7_compensation_identity(builtin_runs, record_ac):
    rep, secs = builtin_runs["quadrant_ruin_2d"]
    comp = gates(rep, "compensation_identity@")
    direct = [e for _, e in rep.estimates if e.kind == "ruin_direct"]
    ok = (len(comp) == 3 and all(g.value <= 3.0 for g in comp)
          and all(e.n_paths == 100_000 for e in direct) and secs < 120)
    record_ac("AC7", ok, "combined z " + ", ".join(f"{g.value:.2f}" for g in comp) + f", {secs:.1f} s")
    assert ok


def test_ac8_duality(builtin_runs, record_ac):
    rep, _ = builtin_runs["cramer_lundberg_exp"]
    direct = estimates(rep, "ruin_direct")
    dual = estimates(rep, "dual_maximum")
    z = {}
    for x in (0.0, 1.0, 2.0):
        a, b = direct[x], dual[x]
        z[x] = abs(a.estimate - b.estimate) / math.hypot(a.stderr, b.stderr)
    ok = max(z.values()) <= 3.0
    record_ac("AC8", ok, "combined z " + ", ".join(f"x={x:g}: {v:.2f}" for x, v in z.items()))
    assert ok


def test_ac9_solver_agreement(builtin_runs, record_ac):
    worst, missing = 0.0, []
    for sid in BUILTINS:
        rep, _ = builtin_runs[sid]
        agree = gates(rep, "solver_agreement")
        if not agree or not all(g.passed for g in agree):
            missing.append(sid)
        worst = max([worst] + [g.value for g in agree])
    ok = not missing
    record_ac("AC9", ok, f"fixed point vs series sup gap <= {worst:.1e} (2 x tol = 2e-10) on "
                         f"{len(BUILTINS) - len(missing)}/{len(BUILTINS)} builtins")
    assert ok


def test_ac10_determinism(tmp_path, record_ac):
    n = 2 * CHUNK + 17  # several chunks, so thread scheduling could matter if it leaked
    differing = []
    for sid in BUILTINS:
        base = builtin_config(sid).with_overrides(n_paths=n)
        runs = [render(run_scenario(base.with_overrides(workers=w))) for w in (1, 3)]
        runs.append(render(run_scenario(base.with_overrides(workers=1))))
        if not (runs[0] == runs[1] == runs[2]):
            differing.append(sid)
        if sid == BUILTINS[0]:
            svgs = []
            for k in range(2):
                d = tmp_path / f"r{k}"
                write_report(run_scenario(base.with_overrides(workers=1 + 2 * k)), d)
                svgs.append([p.read_bytes() for p in emit_plots(d / "report.csv")])
            if svgs[0] != svgs[1] or not svgs[0]:
                differing.append(f"{sid} (svg)")
    ok = not differing
    record_ac("AC10", ok, f"{len(BUILTINS)} builtins, workers 1/3/1 at {n} paths: "
              + ("byte-identical CSVs and SVGs" if ok else "differ: " + ", ".join(differing)))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
