"""Payoff functions ``l(x)`` for potentials and penalties for discounted ruin functionals.

Each payoff is vectorized over points of shape ``(n, d)``.  Where the integral
of ``l`` along a straight segment ``x0 + a s, 0 <= s <= dur`` has a closed
form, ``segment_integral`` returns it; otherwise it returns ``None`` and the
simulator falls back to fixed-panel Simpson quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .heavytail import ClaimModel, ComonotoneSplit, Univariate


class Payoff:
    sup: float = math.inf
    name: str = "payoff"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def segment_integral(self, x0: np.ndarray, a: np.ndarray, dur: np.ndarray):
        return None

    def scaled(self, c: float) -> "Payoff":
        return ScaledPayoff(self, float(c))


def _interval_length(lo, hi, dur):
    return np.maximum(np.minimum(hi, dur) - np.maximum(lo, 0.0), 0.0)


@dataclass(frozen=True)
class Constant(Payoff):
    c: float
    name: str = "constant"

    @property
    def sup(self) -> float:  # type: ignore[override]
        return abs(self.c)

    def __call__(self, x):
        return np.full(np.shape(x)[0], self.c, dtype=float)

    def segment_integral(self, x0, a, dur):
        return self.c * dur


@dataclass(frozen=True)
class ScaledPayoff(Payoff):
    base: Payoff
    c: float
    name: str = "scaled"

    @property
    def sup(self) -> float:  # type: ignore[override]
        return abs(self.c) * self.base.sup

    def __call__(self, x):
        return self.c * self.base(x)

    def segment_integral(self, x0, a, dur):
        v = self.base.segment_integral(x0, a, dur)
        return None if v is None else self.c * v


@dataclass(frozen=True)
class IndicatorQuadrant(Payoff):
    """``1{x_i >= r for all i}``."""

    r: float
    name: str = "indicator_quadrant"
    sup: float = 1.0

    def __call__(self, x):
        return np.all(np.asarray(x) >= self.r, axis=-1).astype(float)

    def segment_integral(self, x0, a, dur):
        lo = np.zeros(x0.shape[0])
        hi = np.full(x0.shape[0], np.inf)
        for i, ai in enumerate(np.asarray(a, dtype=float)):
            xi = x0[:, i]
            if ai > 0:
                lo = np.maximum(lo, (self.r - xi) / ai)
            elif ai < 0:
                hi = np.minimum(hi, (self.r - xi) / ai)
            else:
                hi = np.where(xi >= self.r, hi, -np.inf)
        return _interval_length(lo, hi, dur)


@dataclass(frozen=True)
class IndicatorBall(Payoff):
    """``1{|x - center| <= r}``; the centre defaults to the origin."""

    r: float
    center: tuple[float, ...] | None = None
    name: str = "indicator_ball"
    sup: float = 1.0

    def _shift(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.center is None else x - np.asarray(self.center)

    def __call__(self, x):
        y = self._shift(x)
        return (np.sum(y * y, axis=-1) <= self.r ** 2).astype(float)

    def segment_integral(self, x0, a, dur):
        y = self._shift(x0)
        a = np.asarray(a, dtype=float)
        A = float(a @ a)
        C = np.sum(y * y, axis=-1) - self.r ** 2
        if A == 0.0:
            return np.where(C <= 0, dur, 0.0)
        B = 2.0 * (y @ a)
        disc = B * B - 4.0 * A * C
        root = np.sqrt(np.maximum(disc, 0.0))
        lo = (-B - root) / (2.0 * A)
        hi = (-B + root) / (2.0 * A)
        return np.where(disc > 0, _interval_length(lo, hi, dur), 0.0)


@dataclass(frozen=True)
class ClaimTail(Payoff):
    """``intensity * P(U not in [0, x + shift])``: the compensator of the ruin indicator.

    With ``shift = y`` in one dimension this is the payoff matching the penalty
    ``1{deficit > y}``.
    """

    intensity: float
    claims: ClaimModel
    shift: float = 0.0
    name: str = "claim_tail"

    @property
    def sup(self) -> float:  # type: ignore[override]
        return self.intensity

    def __call__(self, x):
        return self.intensity * np.asarray(self.claims.joint_tail(np.asarray(x) + self.shift))

    def segment_integral(self, x0, a, dur):
        a = np.asarray(a, dtype=float)
        lam = self.intensity
        if isinstance(self.claims, Univariate):
            law = self.claims.law
            b = x0[:, 0] + self.shift
            if a[0] == 0:
                return lam * np.asarray(law.tail(b)) * dur
            return lam * (law.survival_integral(b) - law.survival_integral(b + a[0] * dur)) / a[0]
        if isinstance(self.claims, ComonotoneSplit) and self.claims.dimension == 2:
            return self._comonotone2(x0 + self.shift, a, dur)
        return None

    def _comonotone2(self, x0, a, dur):
        H = self.claims.driver
        p = np.asarray(self.claims.proportions)
        b = x0 / p  # intercepts of the two levels
        c = a / p  # slopes
        lam = self.intensity

        def piece(i, s0, s1):
            if c[i] == 0:
                return lam * np.asarray(H.tail(b[:, i])) * np.maximum(s1 - s0, 0.0)
            return lam * (H.survival_integral(b[:, i] + c[i] * s0)
                          - H.survival_integral(b[:, i] + c[i] * s1)) / c[i]

        # index of the smaller level at s = 0, and the crossing time
        first = np.where(b[:, 0] <= b[:, 1], 0, 1)
        dc = c[0] - c[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(dc != 0, (b[:, 1] - b[:, 0]) / dc, np.inf)
        cross = np.where(cross > 0, cross, np.inf)
        split = np.minimum(cross, dur)
        zero = np.zeros_like(dur)
        out = np.where(first == 0, piece(0, zero, split), piece(1, zero, split))
        rest = np.where(first == 0, piece(1, split, dur), piece(0, split, dur))
        return out + np.where(split < dur, rest, 0.0)


@dataclass(frozen=True)
class PowerUtility(Payoff):
    """``min((w * sum_i p_i e^{-x_i})^alpha, cap)``.

    The uncapped function is unbounded as any coordinate tends to minus
    infinity; ``cap`` keeps the potential finite.
    """

    alpha: float
    proportions: tuple[float, ...]
    withdrawal: float
    cap: float = 100.0
    name: str = "power_utility"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("utility exponent must lie in (0, 1)")
        if min(self.proportions) <= 0 or self.withdrawal <= 0:
            raise ValueError("proportions and withdrawal must be positive")

    @property
    def sup(self) -> float:  # type: ignore[override]
        return self.cap

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = np.asarray(self.proportions)
        # log-sum-exp keeps large negative coordinates finite
        lw = np.log(self.withdrawal) + np.log(p)
        z = lw - x
        m = z.max(axis=-1)
        log_wealth = m + np.log(np.exp(z - m[..., None]).sum(axis=-1))
        return np.minimum(np.exp(np.minimum(self.alpha * log_wealth, 700.0)), self.cap)


@dataclass(frozen=True)
class Custom(Payoff):
    fn: Callable[[np.ndarray], np.ndarray]
    bound: float
    name: str = "custom"

    @property
    def sup(self) -> float:  # type: ignore[override]
        return self.bound

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


def simpson_segment(payoff: Payoff, x0: np.ndarray, a: np.ndarray, dur: np.ndarray,
                    panels: int = 16) -> np.ndarray:
    """Fixed-panel Simpson rule along each segment."""
    n = x0.shape[0]
    if n == 0:
        return np.zeros(0)
    s = np.linspace(0.0, 1.0, panels + 1)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * panels
    pts = x0[:, None, :] + (dur[:, None] * s[None, :])[..., None] * np.asarray(a)[None, None, :]
    vals = payoff(pts.reshape(-1, x0.shape[1])).reshape(n, panels + 1)
    return (vals @ w) * dur


def integrate_segments(payoff: Payoff, x0: np.ndarray, a: np.ndarray, dur: np.ndarray) -> np.ndarray:
    v = payoff.segment_integral(x0, a, dur)
    if v is None:
        v = simpson_segment(payoff, x0, a, dur)
    return np.asarray(v, dtype=float)


# ---------------------------------------------------------------- penalties


class Penalty:
    """Penalty ``w(surplus before ruin, deficit at ruin)``."""

    def __call__(self, pre: np.ndarray, deficit: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def compensator(self, intensity: float, claims: ClaimModel) -> Payoff | None:
        """Payoff ``l(z) = intensity * int w(z, u - z) F(du)`` over ``u > z``, if closed form."""
        return None


@dataclass(frozen=True)
class ConstantPenalty(Penalty):
    c: float = 1.0

    def __call__(self, pre, deficit):
        return np.full(np.shape(deficit), self.c, dtype=float)

    def compensator(self, intensity, claims):
        return ClaimTail(intensity, claims).scaled(self.c)


@dataclass(frozen=True)
class DeficitExceeds(Penalty):
    y: float

    def __call__(self, pre, deficit):
        return (np.asarray(deficit) > self.y).astype(float)

    def compensator(self, intensity, claims):
        return ClaimTail(intensity, claims, self.y)


@dataclass(frozen=True)
class CustomPenalty(Penalty):
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, pre, deficit):
        return np.asarray(self.fn(pre, deficit), dtype=float)
