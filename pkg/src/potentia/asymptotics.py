"""Closed-form limit predictions for potentials and ruin probabilities.

Ratios such as ``l(x) / Fbar(x)`` are examined on a geometric ladder of
points along a path ``x(t)``; trends are judged by a monotone test rather
than by the last rung alone, and an ambiguous ladder is reported as
``inconclusive`` instead of being forced into a class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .heavytail import (
    ClaimModel,
    IntegratedTail,
    Pareto,
    TailModel,
    subexp_ratio,
)

ZERO = "zero"
FINITE = "finite"
INFINITE = "infinite"
INCONCLUSIVE = "inconclusive"


class InconclusiveError(ValueError):
    pass


# ---------------------------------------------------------------- paths and ladders


@dataclass(frozen=True)
class PowerPath:
    """``x_i(t) = coeffs[i] * t ** powers[i]``; a ray when all powers are 1."""

    coeffs: tuple[float, ...]
    powers: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.powers is not None and len(self.powers) != len(self.coeffs):
            raise ValueError("coeffs and powers differ in length")

    @property
    def dimension(self) -> int:
        return len(self.coeffs)

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        c = np.asarray(self.coeffs, dtype=float)
        p = np.ones_like(c) if self.powers is None else np.asarray(self.powers, dtype=float)
        return c[None, :] * t[:, None] ** p[None, :]


def geometric_ladder(start: float, factor: float = 2.0, rungs: int = 6) -> np.ndarray:
    if rungs < 6:
        raise ValueError("a ladder needs at least 6 rungs")
    if start <= 0 or factor <= 1:
        raise ValueError("ladder needs start > 0 and factor > 1")
    return start * factor ** np.arange(rungs)


def _as_path(path) -> Callable[[np.ndarray], np.ndarray]:
    if callable(path):
        return path
    return PowerPath(tuple(float(v) for v in np.atleast_1d(path)))


def _tail_fn(tail) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(tail, ClaimModel):
        return lambda pts: np.asarray(tail.joint_tail(pts), dtype=float)
    if isinstance(tail, TailModel):
        def one_dim(pts):
            pts = np.asarray(pts, dtype=float)
            if pts.shape[-1] != 1:
                raise ValueError("a one-dimensional tail needs one-dimensional points")
            return np.asarray(tail.tail(pts[:, 0]), dtype=float)
        return one_dim
    return lambda pts: np.asarray(tail(pts), dtype=float)


def _limit_class(logs: np.ndarray, growth: float, decay: float, rtol: float) -> str:
    """Classify a sequence given by its logarithms as tending to 0, a constant, or infinity."""
    if np.all(logs == -np.inf):
        return ZERO
    if np.all(logs == np.inf):
        return INFINITE
    with np.errstate(invalid="ignore"):
        d = np.diff(logs)
    both_neg = (logs[1:] == -np.inf) & (logs[:-1] == -np.inf)
    both_pos = (logs[1:] == np.inf) & (logs[:-1] == np.inf)
    d = np.where(both_neg | both_pos, 0.0, d)
    span = logs[-1] - logs[0]
    if np.all(d > 0) and span > math.log(growth):
        return INFINITE
    if np.all(d <= 0) and span < math.log(decay):
        return ZERO
    last = logs[-3:]
    if np.all(np.isfinite(last)) and np.max(np.abs(np.expm1(last - logs[-1]))) < rtol:
        return FINITE
    return INCONCLUSIVE


# ---------------------------------------------------------------- regimes


@dataclass(frozen=True)
class Regime:
    kind: str
    B: float
    ladder: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)

    @property
    def evidence(self) -> list[tuple[float, float]]:
        return list(zip(self.ladder.tolist(), self.ratios.tolist()))


def classify_regime(payoff, tail, path=(1.0,), ladder: Sequence[float] | None = None,
                    start: float = 1.0, factor: float = 2.0, rungs: int = 8,
                    growth: float = 1e3, decay: float = 1e-3, rtol: float = 0.05) -> Regime:
    """Limit ``B`` of ``payoff(x) / tail(x)`` along ``path``.

    ``growth`` and ``decay`` are the factors by which the ratio must rise or
    fall across the ladder (with a monotone trend) before the limit is
    declared infinite or zero.  Being relative, they make the outcome
    invariant under positive scaling of the payoff.  ``tail`` is a
    one-dimensional law, a claim model (its joint tail is used) or a callable
    on points.
    """
    ts = geometric_ladder(start, factor, rungs) if ladder is None else np.asarray(ladder, float)
    if ts.size < 6:
        raise ValueError("a ladder needs at least 6 rungs")
    pts = _as_path(path)(ts)
    ell = np.asarray(payoff(pts), dtype=float)
    fbar = _tail_fn(tail)(pts)
    if np.any(ell < 0):
        raise ValueError("payoff must be nonnegative along the ladder")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.log(ell) - np.log(fbar)
        ratios = ell / fbar
    logs = np.where((ell == 0) & (fbar == 0), -np.inf, logs)
    kind = _limit_class(logs, growth, decay, rtol)
    B = {ZERO: 0.0, INFINITE: math.inf, FINITE: float(ratios[-1])}.get(kind, math.nan)
    return Regime(kind, B, ts, ratios)


# ---------------------------------------------------------------- predictions


@dataclass(frozen=True)
class AsymptoticPrediction:
    """``prefactor * reference(x)`` with the reference named by ``comparison``."""

    tag: str
    prefactor: float
    comparison: str
    fn: Callable = field(repr=False, compare=False)
    note: str = ""
    quantitative: bool = True
    flags: tuple[str, ...] = ()
    case: str = ""

    @property
    def applicable(self) -> bool:
        return self.quantitative and not self.flags

    def __call__(self, x) -> np.ndarray:
        return self.prefactor * np.asarray(self.fn(x), dtype=float)


def _check_rho(rho: float) -> None:
    if not 0 <= rho < 1:
        raise ValueError(f"kernel mass must lie in [0, 1), got {rho}")


def predict_potential(regime: Regime, rho: float, tail=None, payoff=None,
                      payoff_scale: float = 1.0) -> AsymptoticPrediction:
    """Large-``x`` behaviour of the potential from the limit class of ``l / Fbar``.

    ``payoff_scale`` multiplies the payoff before it enters the formulas.
    With a kernel of mass ``lam / (lam + mu)`` the formulas are calibrated
    for a payoff per unit claim intensity, so builtin scenarios pass
    ``1 / lam`` here; see the README.
    """
    _check_rho(rho)
    geo = rho / (1.0 - rho)
    if regime.kind == FINITE:
        if tail is None:
            raise ValueError("finite regime needs the claim tail")
        return AsymptoticPrediction("finite_B", regime.B * payoff_scale * geo, "Fbar",
                                    _tail_fn(tail), note="u ~ B rho/(1-rho) Fbar")
    if regime.kind == ZERO:
        fn = _tail_fn(tail) if tail is not None else (lambda pts: np.full(len(pts), np.nan))
        return AsymptoticPrediction("zero_B", 0.0, "Fbar", fn, note="u = o(Fbar)",
                                    quantitative=False)
    if regime.kind == INFINITE:
        if payoff is None:
            raise ValueError("infinite regime needs the payoff")
        return AsymptoticPrediction("infinite_B", payoff_scale * geo, "ell",
                                    lambda pts: np.asarray(payoff(pts), dtype=float),
                                    note="u ~ rho/(1-rho) l")
    raise InconclusiveError("regime inconclusive; no prediction offered")


def predict_ruin(rho: float, integrated: TailModel, probe: float | None = None,
                 step: float | None = None, light_threshold: float = 3.0) -> AsymptoticPrediction:
    """``psi(x) ~ rho / (1 - rho) * Fbar_I(x)``.

    ``integrated`` is the integrated tail, or the claim law itself (its
    integrated tail is then formed, which refuses infinite means).  The
    doubled-tail ratio of ``F_I`` is measured at ``probe``; above
    ``light_threshold`` the prediction is flagged as inapplicable.
    """
    _check_rho(rho)
    ft = integrated if isinstance(integrated, IntegratedTail) else IntegratedTail(integrated)
    if probe is None:
        probe = 50.0 * ft.source_mean
    if step is None:
        step = probe / 2000.0
    ratio = subexp_ratio(ft, probe, step)
    flags = () if ratio <= light_threshold else ("F_I not subexponential; asymptotic inapplicable",)
    note = f"doubled-tail ratio of F_I at {probe:g} is {ratio:.4g}"
    return AsymptoticPrediction("ruin_integrated_tail", rho / (1.0 - rho), "Fbar_I",
                                lambda x: np.asarray(ft.tail(np.asarray(x, dtype=float)), dtype=float),
                                note=note, flags=flags)


# ---------------------------------------------------------------- two-dimensional examples


def _limit_of(values: np.ndarray, growth: float, decay: float, rtol: float) -> str:
    with np.errstate(divide="ignore"):
        return _limit_class(np.log(values), growth, decay, rtol)


def predict_2d_product(f1: Pareto, f2: Pareto, path, ladder: Sequence[float] | None = None,
                       growth: float = 1e3, decay: float = 1e-3, rtol: float = 0.05) -> AsymptoticPrediction:
    """Dominant term of ``P(U not in [0, x])`` for independent Pareto coordinates.

    The case follows the limit of ``x1^(1+a1) / x2^(1+a2)`` along the path:
    zero keeps the first coordinate, infinity the second, a positive constant
    keeps both.
    """
    if not (isinstance(f1, Pareto) and isinstance(f2, Pareto)):
        raise TypeError("product prediction needs Pareto marginals")
    ts = geometric_ladder(1.0, 2.0, 10) if ladder is None else np.asarray(ladder, float)
    pts = _as_path(path)(ts)
    with np.errstate(divide="ignore", over="ignore"):
        lead = pts[:, 0] ** (1 + f1.alpha) / pts[:, 1] ** (1 + f2.alpha)
    kind = _limit_of(lead, growth, decay, rtol)
    t1 = lambda p: np.asarray(f1.tail(np.asarray(p)[:, 0]), dtype=float)  # noqa: E731
    t2 = lambda p: np.asarray(f2.tail(np.asarray(p)[:, 1]), dtype=float)  # noqa: E731
    if kind == ZERO:
        return AsymptoticPrediction("product", 1.0, "joint_tail", t1, case="first")
    if kind == INFINITE:
        return AsymptoticPrediction("product", 1.0, "joint_tail", t2, case="second")
    if kind == FINITE:
        return AsymptoticPrediction("product", 1.0, "joint_tail", lambda p: t1(p) + t2(p),
                                    case="both", note=f"limit ratio {lead[-1]:.4g}")
    return AsymptoticPrediction("product", 1.0, "joint_tail", lambda p: np.full(len(p), np.nan),
                                quantitative=False, case=INCONCLUSIVE,
                                note="power ratio along the path has no clear limit")


def predict_comonotone(driver: TailModel, share: float, path, ladder: Sequence[float] | None = None,
                       growth: float = 1e3, decay: float = 1e-3, rtol: float = 0.05,
                       boundary_tol: float = 1e-9) -> AsymptoticPrediction:
    """Which coordinate sets the joint tail when the claim is ``(share, 1 - share) * H``."""
    if not 0 < share < 1:
        raise ValueError("share must lie in (0, 1)")
    ts = geometric_ladder(1.0, 2.0, 10) if ladder is None else np.asarray(ladder, float)
    pts = _as_path(path)(ts)
    ratio = pts[:, 0] * (1.0 - share) / (pts[:, 1] * share)
    kind = _limit_of(ratio, growth, decay, rtol)
    first = lambda p: np.asarray(driver.tail(np.asarray(p)[:, 0] / share), dtype=float)  # noqa: E731
    second = lambda p: np.asarray(driver.tail(np.asarray(p)[:, 1] / (1 - share)), dtype=float)  # noqa: E731
    if kind == FINITE and abs(ratio[-1] - 1.0) <= boundary_tol:
        return AsymptoticPrediction("comonotone", 1.0, "joint_tail",
                                    lambda p: np.maximum(first(p), second(p)),
                                    case="boundary", flags=("boundary: both levels coincide",),
                                    note="H(x1/share) and H(x2/(1-share)) agree")
    if kind == INFINITE or (kind == FINITE and ratio[-1] > 1.0):
        return AsymptoticPrediction("comonotone", 1.0, "joint_tail", second, case="second")
    if kind == ZERO or kind == FINITE:
        return AsymptoticPrediction("comonotone", 1.0, "joint_tail", first, case="first")
    return AsymptoticPrediction("comonotone", 1.0, "joint_tail", lambda p: np.full(len(p), np.nan),
                                quantitative=False, case=INCONCLUSIVE,
                                note="level ratio along the path has no clear limit")


# ---------------------------------------------------------------- proportional reinsurance


@dataclass(frozen=True)
class StrongSubexpCheck:
    probes: np.ndarray
    ratios: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.ratios - 1.0) <= self.tol))


def strong_subexp_check(law: TailModel, probes: Sequence[float], tol: float = 0.2) -> StrongSubexpCheck:
    """``int_0^b Fbar(b - y) Fbar(y) dy / (2 E Z Fbar(b))`` at each probe ``b``."""
    m = law.mean
    if not math.isfinite(m):
        raise ValueError("strong subexponentiality needs a finite mean")
    out = []
    for b in np.asarray(probes, dtype=float):
        f = lambda y: float(law.tail(b - y)) * float(law.tail(y))  # noqa: E731
        # the integrand is concentrated near y = 0; split on a geometric mesh
        first = max(law.delta, 1e-3 * b / 2.0)
        edges = [0.0] + [e for e in np.geomspace(first, b / 2.0, 24) if e > 0]
        half = sum(integrate.quad(f, lo, hi, limit=200)[0] for lo, hi in zip(edges[:-1], edges[1:]))
        out.append(2.0 * half / (2.0 * m * float(law.tail(b))))
    return StrongSubexpCheck(np.asarray(probes, dtype=float), np.asarray(out), tol)


@dataclass(frozen=True)
class ReinsurancePrediction:
    value: float
    error: float
    slopes: tuple[float, float]
    crossing: float
    case_holds: bool
    per_share: bool


def predict_prop_reinsurance(law: TailModel, a1: float, a2: float, intensity: float, share: float,
                             x: Sequence[float], per_share: bool = True) -> ReinsurancePrediction:
    """Single-big-claim approximation of the joint ruin probability of two companies.

    Company 1 pays ``share * Z`` and company 2 pays ``(1 - share) * Z`` from
    each claim; premiums accrue at rates ``a1, a2`` and claims arrive at
    ``intensity``.  Measured in claim epochs, surplus ``i`` drifts at
    ``c_i = a_i / intensity - s_i E Z`` and the prediction is

        int_0^inf Fbar_Z(min(L_1(t), L_2(t))) dt,  L_i(t) = (x_i + c_i t) / s_i.

    With ``per_share=False`` the levels are not divided by the shares.  The
    integrand is piecewise of the form ``Fbar_Z(b + c t)`` so each piece is
    a difference of stop-loss transforms; ``error`` is the gap to adaptive
    quadrature of the same integral.
    """
    if not 0 < share < 1:
        raise ValueError("share must lie in (0, 1)")
    m = law.mean
    if not math.isfinite(m):
        raise ValueError("prediction needs a finite claim mean")
    s = np.array([share, 1.0 - share])
    c = np.array([a1, a2]) / intensity - s * m
    if np.any(c <= 0):
        raise ValueError(f"drift coefficients must be positive, got {c.tolist()}")
    x = np.asarray(x, dtype=float)
    div = s if per_share else np.ones(2)
    b, k = x / div, c / div
    # the smaller level at t = 0 stays smaller until the lines cross
    lo = 0 if b[0] <= b[1] else 1
    hi = 1 - lo
    cross = (b[hi] - b[lo]) / (k[lo] - k[hi]) if k[lo] > k[hi] else math.inf
    S = law.survival_integral
    v = (float(S(b[lo])) - (float(S(b[lo] + k[lo] * cross)) if math.isfinite(cross) else 0.0)) / k[lo]
    if math.isfinite(cross):
        v += float(S(b[hi] + k[hi] * cross)) / k[hi]
    g = lambda t: float(law.tail(min(b[0] + k[0] * t, b[1] + k[1] * t)))  # noqa: E731
    if math.isfinite(cross):
        q = integrate.quad(g, 0.0, cross, limit=400)[0] + integrate.quad(g, cross, math.inf, limit=400)[0]
    else:
        q = integrate.quad(g, 0.0, math.inf, limit=400)[0]
    holds = bool(a1 > a2 and x[0] < x[1])
    return ReinsurancePrediction(v, abs(v - q), (float(c[0]), float(c[1])), float(cross), holds, per_share)


# ---------------------------------------------------------------- ratio curves


@dataclass(frozen=True)
class RatioCurve:
    x: np.ndarray
    ratio: np.ndarray

    @property
    def distance(self) -> np.ndarray:
        return np.abs(self.ratio - 1.0)

    def within(self, lo: float, hi: float) -> bool:
        return bool(np.all((self.ratio >= lo) & (self.ratio <= hi)))

    def settling(self, last: int = 3, slack: float = 0.0) -> bool:
        """True when ``|ratio - 1|`` is nonincreasing over the final ``last`` rungs."""
        d = self.distance[-last:]
        return bool(np.all(np.diff(d) <= slack))


def ratio_curve(x, numeric, predicted) -> RatioCurve:
    numeric = np.asarray(numeric, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return RatioCurve(np.asarray(x, dtype=float), numeric / predicted)
