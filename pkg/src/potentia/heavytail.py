"""One-dimensional claim-size laws, integrated tails and multivariate claim constructions.

Every law exposes the survival function ``tail(z) = P(U > z)``, its logarithm,
an inverse (``quantile``) and the quantities the renewal and simulation layers
need: point masses, the survival integral ``S(x) = int_x^inf tail(y) dy`` and
the mean.  Tails are computed in log-space wherever they can drop below the
double-precision range.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats

_TINY = 1e-300


class InfiniteMeanError(ValueError):
    """Raised when an operation needs a finite mean and the law has none."""


class TailUnderflowError(ArithmeticError):
    """Raised when a tail value is not representable even in log-space."""


class EmpiricalTailWarning(UserWarning):
    """Emitted when an empirical tail is queried beyond its largest sample."""


def _arr(z) -> np.ndarray:
    return np.asarray(z, dtype=float)


def _out(v: np.ndarray, like):
    return float(v) if np.ndim(like) == 0 else v


class TailModel:
    """Base class for claim-size laws supported on ``[delta, inf)``."""

    family: str = "abstract"
    delta: float = 0.0

    # subclasses implement _tail and _logtail on float arrays
    def _tail(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _logtail(self, z: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self._tail(z))

    def tail(self, z):
        """Survival probability ``P(U > z)``."""
        z = _arr(z)
        return _out(np.clip(self._tail(z), 0.0, 1.0), z)

    def logtail(self, z):
        z = _arr(z)
        return _out(np.minimum(self._logtail(z), 0.0), z)

    def cdf(self, z):
        z = _arr(z)
        return _out(1.0 - np.clip(self._tail(z), 0.0, 1.0), z)

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        """Point masses as ``(location, mass)`` pairs."""
        return ()

    def continuous_tail(self, z):
        """Tail of the absolutely continuous part (total mass minus atoms)."""
        z = _arr(z)
        out = np.clip(self._tail(z), 0.0, 1.0)
        for loc, m in self.atoms:
            out = out - m * (z < loc)
        return _out(np.maximum(out, 0.0), z)

    def quantile(self, p):
        """Smallest ``z`` with ``tail(z) <= p`` for ``p`` in (0, 1]."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform draws; consumes exactly one uniform per variate."""
        u = rng.random(size)
        return self.quantile(1.0 - u)

    @property
    def mean(self) -> float:
        raise NotImplementedError

    def survival_integral(self, x):
        """``int_x^inf tail(y) dy``; for ``x < 0`` the tail counts as 1 on the negative axis."""
        raise NotImplementedError

    def log_survival_integral(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.survival_integral(x))


@dataclass(frozen=True)
class Pareto(TailModel):
    """``tail(z) = c z^(-1-alpha)`` for ``z >= delta`` and 1 below.

    If ``c delta^(-1-alpha) < 1`` the remaining mass sits as an atom at
    ``delta``.  ``alpha`` may lie in (-1, 0]; the law then has an infinite
    mean and integrated tails are refused.
    """

    alpha: float
    c: float = 1.0
    delta: float = 1.0
    family: str = field(default="pareto", init=False, repr=False)

    def __post_init__(self):
        if not self.alpha > -1.0:
            raise ValueError("Pareto alpha must exceed -1")
        if not (self.c > 0 and self.delta > 0):
            raise ValueError("Pareto needs c > 0 and delta > 0")
        if self.c * self.delta ** (-1.0 - self.alpha) > 1.0 + 1e-12:
            raise ValueError("Pareto tail at delta exceeds 1; lower c or raise delta")

    @property
    def _edge(self) -> float:
        return min(1.0, self.c * self.delta ** (-1.0 - self.alpha))

    def _tail(self, z):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.c * np.power(np.maximum(z, self.delta), -1.0 - self.alpha)
        return np.where(z < self.delta, 1.0, v)

    def _logtail(self, z):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = math.log(self.c) - (1.0 + self.alpha) * np.log(np.maximum(z, self.delta))
        return np.where(z < self.delta, 0.0, v)

    @property
    def atoms(self):
        m = 1.0 - self._edge
        return ((self.delta, m),) if m > 1e-15 else ()

    def quantile(self, p):
        p = _arr(p)
        with np.errstate(divide="ignore"):
            z = np.power(self.c / p, 1.0 / (1.0 + self.alpha))
        return _out(np.where(p >= self._edge, self.delta, z), p)

    @property
    def mean(self) -> float:
        if self.alpha <= 0:
            return math.inf
        return self.delta + self.c * self.delta ** (-self.alpha) / self.alpha

    def survival_integral(self, x):
        x = _arr(x)
        if self.alpha <= 0:
            return _out(np.full_like(x, np.inf), x)
        a = self.alpha
        above = self.c * np.power(np.maximum(x, self.delta), -a) / a
        below = (self.delta - x) + self.c * self.delta ** (-a) / a
        return _out(np.where(x < self.delta, below, above), x)

    def log_survival_integral(self, x):
        x = _arr(x)
        a = self.alpha
        if a <= 0:
            return _out(np.full_like(x, np.inf), x)
        above = math.log(self.c / a) - a * np.log(np.maximum(x, self.delta))
        with np.errstate(divide="ignore", invalid="ignore"):
            below = np.log(np.maximum((self.delta - x) + self.c * self.delta ** (-a) / a, _TINY))
        return _out(np.where(x < self.delta, below, above), x)


@dataclass(frozen=True)
class Exponential(TailModel):
    """Exponential law with rate ``beta`` shifted to start at ``delta``."""

    beta: float
    delta: float = 0.0
    family: str = field(default="exponential", init=False, repr=False)

    def __post_init__(self):
        if not self.beta > 0 or self.delta < 0:
            raise ValueError("Exponential needs beta > 0 and delta >= 0")

    def _tail(self, z):
        return np.exp(self._logtail(z))

    def _logtail(self, z):
        return np.where(z < self.delta, 0.0, -self.beta * (z - self.delta))

    def quantile(self, p):
        p = _arr(p)
        with np.errstate(divide="ignore"):
            return _out(self.delta - np.log(p) / self.beta, p)

    @property
    def mean(self) -> float:
        return self.delta + 1.0 / self.beta

    def survival_integral(self, x):
        x = _arr(x)
        above = np.exp(-self.beta * np.maximum(x - self.delta, 0.0)) / self.beta
        return _out(np.where(x < self.delta, self.delta - x + 1.0 / self.beta, above), x)

    def log_survival_integral(self, x):
        x = _arr(x)
        above = -self.beta * (x - self.delta) - math.log(self.beta)
        with np.errstate(invalid="ignore"):
            below = np.log(np.maximum(self.delta - x, 0.0) + 1.0 / self.beta)
        return _out(np.where(x < self.delta, below, above), x)


def _log_upper_gamma_q(a: float, y: np.ndarray) -> np.ndarray:
    """log of the regularized upper incomplete gamma Q(a, y), stable for large y."""
    q = special.gammaincc(a, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(q)
        ys = np.maximum(y, 1.0)
        series = 1.0 + (a - 1.0) / ys + (a - 1.0) * (a - 2.0) / ys**2
        asym = (a - 1.0) * np.log(ys) - ys + np.log(series) - special.gammaln(a)
    return np.where(q > _TINY, direct, asym)


@dataclass(frozen=True)
class Weibull(TailModel):
    """``tail(z) = exp(-((z - delta)/scale)^shape)``; heavy-tailed for shape < 1."""

    shape: float
    scale: float = 1.0
    delta: float = 0.0
    family: str = field(default="weibull", init=False, repr=False)

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0) or self.delta < 0:
            raise ValueError("Weibull needs shape > 0, scale > 0, delta >= 0")

    def _logtail(self, z):
        y = np.maximum(z - self.delta, 0.0) / self.scale
        return -np.power(y, self.shape)

    def _tail(self, z):
        return np.exp(self._logtail(z))

    def quantile(self, p):
        p = _arr(p)
        with np.errstate(divide="ignore"):
            r = np.power(-np.log(p), 1.0 / self.shape)
        return _out(self.delta + self.scale * r, p)

    @property
    def _m0(self) -> float:
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    @property
    def mean(self) -> float:
        return self.delta + self._m0

    def survival_integral(self, x):
        x = _arr(x)
        y = np.power(np.maximum(x - self.delta, 0.0) / self.scale, self.shape)
        above = self._m0 * special.gammaincc(1.0 / self.shape, y)
        return _out(np.where(x < self.delta, self.delta - x + self._m0, above), x)

    def log_survival_integral(self, x):
        x = _arr(x)
        y = np.power(np.maximum(x - self.delta, 0.0) / self.scale, self.shape)
        above = math.log(self._m0) + _log_upper_gamma_q(1.0 / self.shape, y)
        with np.errstate(invalid="ignore"):
            below = np.log(np.maximum(self.delta - x, 0.0) + self._m0)
        return _out(np.where(x < self.delta, below, above), x)


@dataclass(frozen=True)
class Lognormal(TailModel):
    """``log(U - delta)`` is normal with mean ``mu`` and standard deviation ``sigma``."""

    mu: float = 0.0
    sigma: float = 1.0
    delta: float = 0.0
    family: str = field(default="lognormal", init=False, repr=False)

    def __post_init__(self):
        if not self.sigma > 0 or self.delta < 0:
            raise ValueError("Lognormal needs sigma > 0 and delta >= 0")

    def _score(self, z):
        with np.errstate(divide="ignore"):
            return (np.log(np.maximum(z - self.delta, 0.0)) - self.mu) / self.sigma

    def _tail(self, z):
        return np.where(z <= self.delta, 1.0, stats.norm.sf(self._score(z)))

    def _logtail(self, z):
        return np.where(z <= self.delta, 0.0, stats.norm.logsf(self._score(z)))

    def quantile(self, p):
        p = _arr(p)
        return _out(self.delta + np.exp(self.mu + self.sigma * stats.norm.isf(p)), p)

    @property
    def mean(self) -> float:
        return self.delta + math.exp(self.mu + 0.5 * self.sigma**2)

    def log_survival_integral(self, x):
        # stop-loss transform E(U - x)^+ written through erfcx to avoid cancellation
        x = _arr(x)
        m, s = self.mu, self.sigma
        y = np.maximum(x - self.delta, _TINY)
        t1 = (np.log(y) - m - s * s) / s
        t2 = t1 + s
        r2 = math.sqrt(2.0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            far = (m + 0.5 * s * s - 0.5 * t1 * t1
                   + np.log(0.5 * (special.erfcx(t1 / r2) - special.erfcx(t2 / r2))))
            near = np.log(math.exp(m + 0.5 * s * s) * stats.norm.cdf(-t1) - y * stats.norm.cdf(-t2))
        above = np.where(t1 > 0, far, near)
        below = np.log(np.maximum(self.delta - x, 0.0) + math.exp(m + 0.5 * s * s))
        return _out(np.where(x <= self.delta, below, above), x)

    def survival_integral(self, x):
        x = _arr(x)
        return _out(np.exp(self.log_survival_integral(x)), x)


class Empirical(TailModel):
    """Right-continuous step tail of a sample; every sample is a point mass."""

    family = "empirical"

    def __init__(self, samples: Sequence[float]):
        s = np.sort(np.asarray(samples, dtype=float).ravel())
        if s.size == 0 or not np.all(np.isfinite(s)) or s[0] < 0:
            raise ValueError("Empirical needs a non-empty sample of finite values >= 0")
        s.setflags(write=False)
        self.samples = s
        self.delta = float(s[0])
        self._suffix = np.concatenate([np.cumsum(s[::-1])[::-1], [0.0]])

    def __repr__(self):
        return f"Empirical(n={self.samples.size}, max={self.samples[-1]:g})"

    def _tail(self, z):
        n = self.samples.size
        if np.any(z > self.samples[-1]):
            warnings.warn("empirical tail queried beyond the largest sample; returning 0",
                          EmpiricalTailWarning, stacklevel=3)
        k = np.searchsorted(self.samples, z, side="right")
        return (n - k) / n

    @property
    def atoms(self):
        loc, cnt = np.unique(self.samples, return_counts=True)
        n = self.samples.size
        return tuple((float(a), c / n) for a, c in zip(loc, cnt))

    def continuous_tail(self, z):
        z = _arr(z)
        return _out(np.zeros_like(z), z)

    def quantile(self, p):
        p = _arr(p)
        n = self.samples.size
        k = np.clip(np.ceil(n * (1.0 - p) - 1.0 - 1e-12), 0, n - 1).astype(int)
        return _out(self.samples[k], p)

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    def survival_integral(self, x):
        x = _arr(x)
        n = self.samples.size
        k = np.searchsorted(self.samples, x, side="right")
        return _out((self._suffix[k] - x * (n - k)) / n, x)


@dataclass(frozen=True)
class Scaled(TailModel):
    """Law of ``factor * U`` for a base law ``U``."""

    base: TailModel
    factor: float
    family: str = field(default="scaled", init=False, repr=False)

    def __post_init__(self):
        if not self.factor > 0:
            raise ValueError("scale factor must be positive")

    @property
    def delta(self) -> float:  # type: ignore[override]
        return self.base.delta * self.factor

    def _tail(self, z):
        return self.base._tail(z / self.factor)

    def _logtail(self, z):
        return self.base._logtail(z / self.factor)

    @property
    def atoms(self):
        return tuple((loc * self.factor, m) for loc, m in self.base.atoms)

    def continuous_tail(self, z):
        return self.base.continuous_tail(_arr(z) / self.factor)

    def quantile(self, p):
        return self.factor * self.base.quantile(p)

    @property
    def mean(self) -> float:
        return self.factor * self.base.mean

    def survival_integral(self, x):
        return self.factor * self.base.survival_integral(_arr(x) / self.factor)

    def log_survival_integral(self, x):
        return math.log(self.factor) + self.base.log_survival_integral(_arr(x) / self.factor)


class IntegratedTail(TailModel):
    """Law with density ``tail(y)/mean`` on ``[0, inf)`` built from a finite-mean source."""

    family = "integrated"
    delta = 0.0

    def __init__(self, source: TailModel):
        mu = source.mean
        if not math.isfinite(mu):
            raise InfiniteMeanError("infinite mean: integrated tail undefined")
        if mu <= 0:
            raise ValueError("integrated tail needs a positive mean")
        self.source = source
        self.source_mean = float(mu)

    def __repr__(self):
        return f"IntegratedTail({self.source!r})"

    def _tail(self, x):
        return np.where(x <= 0, 1.0, self.source.survival_integral(np.maximum(x, 0.0)) / self.source_mean)

    def _logtail(self, x):
        v = self.source.log_survival_integral(np.maximum(x, 0.0)) - math.log(self.source_mean)
        return np.where(x <= 0, 0.0, v)

    def tail_I(self, x):
        return self.tail(x)

    def cdf_I(self, x):
        return self.cdf(x)

    def density(self, x):
        x = _arr(x)
        return _out(np.where(x < 0, 0.0, self.source.tail(x) / self.source_mean), x)

    def quantile(self, p):
        p = _arr(p)
        src, mu = self.source, self.source_mean
        target = p * mu
        if isinstance(src, Exponential):
            lin = src.delta + 1.0 / src.beta - target
            with np.errstate(divide="ignore"):
                ex = src.delta - np.log(target * src.beta) / src.beta
            return _out(np.where(target >= 1.0 / src.beta, lin, ex), p)
        if isinstance(src, Pareto):
            a, tail_part = src.alpha, src.c * src.delta ** (-src.alpha) / src.alpha
            lin = src.delta + tail_part - target
            with np.errstate(divide="ignore"):
                pw = np.power(src.c / (a * target), 1.0 / a)
            return _out(np.where(target >= tail_part, lin, pw), p)
        return _out(self._bisect(p), p)

    def _bisect(self, p: np.ndarray) -> np.ndarray:
        p = np.atleast_1d(p).astype(float)
        lo = np.zeros_like(p)
        hi = np.full_like(p, max(1.0, self.source_mean))
        for _ in range(200):
            need = self._tail(hi) > p
            if not need.any():
                break
            hi = np.where(need, 2.0 * hi, hi)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            above = self._tail(mid) > p
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return hi

    def survival_integral(self, x):
        raise NotImplementedError("second-order integrated tails are not needed")

    @property
    def mean(self) -> float:
        raise NotImplementedError("mean of the integrated tail is not provided")


# ---------------------------------------------------------------- multivariate claims


class ClaimModel:
    """d-dimensional claim law; ``joint_tail(x) = P(U not in [0, x])``."""

    dimension: int = 1

    def joint_tail(self, x) -> np.ndarray:
        raise NotImplementedError

    def joint_survival(self, x) -> np.ndarray:
        """``P(U_i > x_i for every i)``."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | tuple) -> np.ndarray:
        raise NotImplementedError

    def marginal(self, i: int) -> TailModel:
        raise NotImplementedError

    @property
    def means(self) -> np.ndarray:
        return np.array([self.marginal(i).mean for i in range(self.dimension)])

    @property
    def delta(self) -> float:
        return min(self.marginal(i).delta for i in range(self.dimension))


def _lastaxis(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"expected points of dimension {d}, got trailing axis {x.shape[-1]}")
    return x


@dataclass(frozen=True)
class Univariate(ClaimModel):
    law: TailModel
    dimension: int = field(default=1, init=False)

    def joint_tail(self, x):
        return self.law.tail(_lastaxis(x, 1)[..., 0])

    def joint_survival(self, x):
        return self.joint_tail(x)

    def sample(self, rng, size):
        size = (size,) if np.ndim(size) == 0 else tuple(size)
        return np.asarray(self.law.sample(rng, size))[..., None]

    def marginal(self, i):
        if i != 0:
            raise IndexError(i)
        return self.law


@dataclass(frozen=True)
class IndependentProduct(ClaimModel):
    laws: tuple[TailModel, ...]

    def __post_init__(self):
        object.__setattr__(self, "laws", tuple(self.laws))
        if len(self.laws) < 1:
            raise ValueError("need at least one marginal")

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return len(self.laws)

    def joint_survival(self, x):
        x = _lastaxis(x, self.dimension)
        out = np.ones(x.shape[:-1])
        for i, law in enumerate(self.laws):
            out = out * law.tail(x[..., i])
        return out if out.ndim else float(out)

    def joint_tail(self, x):
        x = _lastaxis(x, self.dimension)
        # 1 - prod(1 - t_i) without cancellation when every t_i is tiny
        log_inside = np.zeros(x.shape[:-1])
        with np.errstate(divide="ignore"):
            for i, law in enumerate(self.laws):
                log_inside = log_inside + np.log1p(-np.asarray(law.tail(x[..., i]), dtype=float))
        out = -np.expm1(log_inside)
        return out if out.ndim else float(out)

    def sample(self, rng, size):
        size = (size,) if np.ndim(size) == 0 else tuple(size)
        cols = [np.asarray(law.sample(rng, size)) for law in self.laws]
        return np.stack(cols, axis=-1)

    def marginal(self, i):
        return self.laws[i]


@dataclass(frozen=True)
class ComonotoneSplit(ClaimModel):
    """One driver claim ``Xi`` split as ``(p_1 Xi, ..., p_d Xi)``."""

    driver: TailModel
    proportions: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(v) for v in self.proportions)
        object.__setattr__(self, "proportions", p)
        if len(p) < 1 or min(p) <= 0 or abs(sum(p) - 1.0) > 1e-9:
            raise ValueError("proportions must be positive and sum to 1")

    @property
    def dimension(self) -> int:  # type: ignore[override]
        return len(self.proportions)

    def _levels(self, x):
        x = _lastaxis(x, self.dimension)
        return x / np.asarray(self.proportions)

    def joint_tail(self, x):
        return self.driver.tail(self._levels(x).min(axis=-1))

    def joint_survival(self, x):
        return self.driver.tail(self._levels(x).max(axis=-1))

    def sample(self, rng, size):
        size = (size,) if np.ndim(size) == 0 else tuple(size)
        xi = np.asarray(self.driver.sample(rng, size))
        return xi[..., None] * np.asarray(self.proportions)

    def marginal(self, i):
        return Scaled(self.driver, self.proportions[i])


# ---------------------------------------------------------------- functional interface


def tail(model: TailModel, z):
    return model.tail(z)


def sample(model: TailModel, rng: np.random.Generator, size=None):
    return model.sample(rng, size)


def integrated_tail(model: TailModel) -> IntegratedTail:
    return IntegratedTail(model)


def joint_tail(claims: ClaimModel, x):
    return claims.joint_tail(x)


def subexp_ratio(model: TailModel, x: float, step: float) -> float:
    """``P(U1 + U2 > x) / P(U1 > x)`` by a cell sum carried out on log-tails.

    Uses ``tail*2(x) = tail(x) + int_[0,x] tail(x - y) F(dy)`` with the
    measure ``F`` lumped to cell midpoints of width ``step``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    lx = float(model.logtail(x))
    if not math.isfinite(lx):
        raise TailUnderflowError("tail underflow; use log-domain extent")
    n = max(1, int(math.ceil(x / step - 1e-12)))
    edges = np.minimum(np.arange(n + 1) * step, x)
    lt = np.asarray(model.logtail(edges), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = np.where(np.isfinite(lt[1:]), lt[1:] - lt[:-1], -np.inf)
        logm = lt[:-1] + np.log(-np.expm1(diff))
    logm = np.where(np.isfinite(lt[:-1]), logm, -np.inf)
    mids = 0.5 * (edges[:-1] + edges[1:])
    terms = np.exp(logm + np.asarray(model.logtail(x - mids)) - lx)
    mass0 = float(model.cdf(0.0))  # mass sitting at or below 0
    return float(1.0 + np.nansum(terms) + mass0)


@dataclass(frozen=True)
class TailDiagnostics:
    x: np.ndarray
    subexp: np.ndarray
    long_tail: np.ndarray
    heavy_witness: np.ndarray
    shift: float
    varsigma: float


def tail_diagnostics(model: TailModel, xs, shift: float = 1.0, varsigma: float = 0.1,
                     step: float = 0.05) -> TailDiagnostics:
    """Ratio curves for the subexponential, long-tail and heavy-tail properties."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    sub = np.array([subexp_ratio(model, float(x), step) for x in xs])
    lt = np.asarray(model.logtail(xs))
    lt_shift = np.asarray(model.logtail(xs - shift))
    long_tail = np.exp(lt_shift - lt)
    heavy = np.exp(np.minimum(lt + varsigma * xs, 700.0))
    return TailDiagnostics(xs, sub, long_tail, heavy, shift, varsigma)
