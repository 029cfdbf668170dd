"""Scenario configuration: YAML files validated against a closed schema.

Unknown keys are rejected everywhere so a typo cannot silently fall back to
a default.  ``build_*`` helpers turn validated sections into library objects.
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import heavytail as ht
from . import kernels as kn
from . import payoffs as po


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------------------------------------------------- laws


class ParetoCfg(_Strict):
    family: Literal["pareto"]
    alpha: float
    c: float = 1.0
    delta: float = 1.0


class ExponentialCfg(_Strict):
    family: Literal["exponential"]
    beta: float
    delta: float = 0.0


class WeibullCfg(_Strict):
    family: Literal["weibull"]
    shape: float
    scale: float = 1.0
    delta: float = 0.0


class LognormalCfg(_Strict):
    family: Literal["lognormal"]
    mu: float = 0.0
    sigma: float = 1.0
    delta: float = 0.0


class EmpiricalCfg(_Strict):
    family: Literal["empirical"]
    samples: list[float]


LawCfg = Annotated[Union[ParetoCfg, ExponentialCfg, WeibullCfg, LognormalCfg, EmpiricalCfg],
                   Field(discriminator="family")]


class UnivariateCfg(_Strict):
    structure: Literal["univariate"]
    law: LawCfg


class ProductCfg(_Strict):
    structure: Literal["independent"]
    laws: list[LawCfg]


class ComonotoneCfg(_Strict):
    structure: Literal["comonotone"]
    driver: LawCfg
    proportions: list[float]


ClaimsCfg = Annotated[Union[UnivariateCfg, ProductCfg, ComonotoneCfg], Field(discriminator="structure")]


# ---------------------------------------------------------------- process


class SmallCfg(_Strict):
    kind: Literal["drift_only", "brownian", "small_jumps", "ou"] = "drift_only"
    sigma: float = 0.0
    rate: float = 0.0
    jump_low: float = 0.0
    jump_high: float = 0.0
    theta: float = -1.0


class KillCfg(_Strict):
    kind: Literal["exp", "ruin", "quadrant"]
    mu: float = 0.0


class ModelCfg(_Strict):
    intensity: float
    drift: list[float]
    claims: ClaimsCfg
    small: SmallCfg = SmallCfg()
    kill: KillCfg
    delta: float = 1.0
    dt: float = 0.01


class PayoffCfg(_Strict):
    kind: Literal["constant", "indicator_ball", "indicator_quadrant", "claim_tail", "power_utility"]
    c: float = 1.0
    r: float = 1.0
    shift: float = 0.0
    alpha: float = 0.5
    proportions: list[float] = [1.0]
    withdrawal: float = 1.0
    cap: float = 100.0
    scale: Union[float, Literal["intensity"]] = 1.0


# ---------------------------------------------------------------- numerics


class GridCfg(_Strict):
    step: float = 0.01
    x_max: float = 40.0
    x_min: float = 0.0


class QuadratureCfg(_Strict):
    panels: int = 4096
    t_max_factor: float = 40.0
    tol: float = 1e-7


class SolverCfg(_Strict):
    tol: float = 1e-10


class McCfg(_Strict):
    n_paths: int = 100_000
    seed: int = 20240601
    horizon: Union[float, Literal["auto"]] = "auto"
    workers: int = 1
    starts: list[list[float]] = []

    @field_validator("starts", mode="before")
    @classmethod
    def _wrap_scalars(cls, v):
        return [x if isinstance(x, (list, tuple)) else [x] for x in (v or [])]


class PathCfg(_Strict):
    coeffs: list[float]
    powers: list[float] | None = None
    share: float | None = None
    label: str = ""


class LadderCfg(_Strict):
    start: float = 1.0
    factor: float = 2.0
    rungs: int = 6
    path: PathCfg = PathCfg(coeffs=[1.0])

    @field_validator("rungs")
    @classmethod
    def _enough(cls, v):
        if v < 6:
            raise ValueError("a ladder needs at least 6 rungs")
        return v


class GatesCfg(_Strict):
    closed_form_sup: float = 1e-3
    sigma: float = 3.0
    bias_proxy: float | None = 0.02
    ratio_low: float = 0.7
    ratio_high: float = 1.3
    settle: bool = True
    limit_rtol: float = 0.05
    tail_rtol: float = 0.15
    decay_rtol: float = 0.10
    mass_tol: float = 1e-6
    regime: Literal["zero", "finite", "infinite"] | None = None


class OutputCfg(_Strict):
    dir: str = "potentia-out"


class RuinOpts(_Strict):
    ladder: list[float] = []
    dual_starts: list[float] = []


class TwoDOpts(_Strict):
    paths: list[PathCfg] = []
    probe: float = 512.0
    rungs: int = 16  # case-selection ladder 1, 2, 4, ...
    marginal_starts: list[float] = []


class ReinsuranceOpts(_Strict):
    share: float = 0.5
    per_share: bool = True
    strong_probes: list[float] = [100.0, 1000.0]


class DecayOpts(_Strict):
    window: tuple[float, float] = (2.0, 12.0)
    lambdas: list[float] = [1.0, 2.0, 4.0]
    mass_pairs: list[tuple[float, float]] = [(1.0, 1.0)]
    mass_claims: list[LawCfg] = []


class UtilityOpts(_Strict):
    marginal_starts: list[float] = []


Kind = Literal["ruin_1d", "expkill_potential", "twod_tail", "quadrant_ruin", "prop_reinsurance",
               "consumption_utility", "kernel_decay"]


class ScenarioConfig(_Strict):
    id: str
    kind: Kind
    description: str = ""
    model: ModelCfg
    payoff: PayoffCfg | None = None
    grid: GridCfg = GridCfg()
    quadrature: QuadratureCfg = QuadratureCfg()
    solver: SolverCfg = SolverCfg()
    mc: McCfg = McCfg()
    ladder: LadderCfg | None = None
    gates: GatesCfg = GatesCfg()
    output: OutputCfg = OutputCfg()
    ruin: RuinOpts | None = None
    twod: TwoDOpts | None = None
    reinsurance: ReinsuranceOpts | None = None
    decay: DecayOpts | None = None
    utility: UtilityOpts | None = None

    def with_overrides(self, seed: int | None = None, n_paths: int | None = None,
                       out: str | None = None, workers: int | None = None) -> "ScenarioConfig":
        mc = self.mc.model_copy(update={k: v for k, v in
                                        (("seed", seed), ("n_paths", n_paths), ("workers", workers))
                                        if v is not None})
        upd: dict = {"mc": mc}
        if out is not None:
            upd["output"] = OutputCfg(dir=out)
        return self.model_copy(update=upd)

    def resolved(self) -> dict:
        """Every field, defaults included, minus the thread count (which cannot change results)."""
        d = self.model_dump(mode="json")
        d["mc"].pop("workers", None)
        d.pop("output", None)
        return d


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        lines.append(f"{loc}: {e['msg']}")
    return "invalid scenario config\n  " + "\n  ".join(lines)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_error(err)) from None


def load_config(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"unreadable YAML in {path}: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)


# ---------------------------------------------------------------- builders


def build_law(cfg) -> ht.TailModel:
    if cfg.family == "pareto":
        return ht.Pareto(cfg.alpha, cfg.c, cfg.delta)
    if cfg.family == "exponential":
        return ht.Exponential(cfg.beta, cfg.delta)
    if cfg.family == "weibull":
        return ht.Weibull(cfg.shape, cfg.scale, cfg.delta)
    if cfg.family == "lognormal":
        return ht.Lognormal(cfg.mu, cfg.sigma, cfg.delta)
    return ht.Empirical(cfg.samples)


def build_claims(cfg) -> ht.ClaimModel:
    if cfg.structure == "univariate":
        return ht.Univariate(build_law(cfg.law))
    if cfg.structure == "independent":
        return ht.IndependentProduct(tuple(build_law(c) for c in cfg.laws))
    return ht.ComonotoneSplit(build_law(cfg.driver), tuple(cfg.proportions))


def build_small(cfg: ModelCfg):
    s = cfg.small
    a = list(cfg.drift)
    if s.kind == "drift_only":
        return kn.DriftOnly(a)
    if s.kind == "brownian":
        return kn.DriftBrownian(a, s.sigma)
    jumps = kn.UniformJumps(s.jump_low, s.jump_high)
    if s.kind == "small_jumps":
        return kn.DriftSmallJumps(a, s.rate, jumps)
    return kn.OrnsteinUhlenbeck(a, s.theta, s.rate, jumps, s.sigma)


def build_kill(cfg: KillCfg) -> kn.Killing:
    if cfg.kind == "exp":
        return kn.ExpKill(cfg.mu)
    return kn.FirstPassageRuin(cfg.mu) if cfg.kind == "ruin" else kn.QuadrantExit(cfg.mu)


def build_payoff(cfg: PayoffCfg | None, intensity: float, claims: ht.ClaimModel):
    if cfg is None:
        return None
    if cfg.kind == "constant":
        p: po.Payoff = po.Constant(cfg.c)
    elif cfg.kind == "indicator_ball":
        p = po.IndicatorBall(cfg.r)
    elif cfg.kind == "indicator_quadrant":
        p = po.IndicatorQuadrant(cfg.r)
    elif cfg.kind == "claim_tail":
        p = po.ClaimTail(intensity, claims, cfg.shift)
    else:
        p = po.PowerUtility(cfg.alpha, tuple(cfg.proportions), cfg.withdrawal, cfg.cap)
    scale = intensity if cfg.scale == "intensity" else float(cfg.scale)
    return p if scale == 1.0 else p.scaled(scale)
