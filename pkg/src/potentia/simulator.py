"""Monte Carlo for ``X_t = x + Y_t - sum_{k <= N_t} U_k`` with killing.

Paths are simulated in fixed-size chunks.  Chunk ``c`` draws all of its
variates from counter-based streams keyed by ``(seed, c, block, purpose)``,
so an estimate depends only on ``(spec, seed, n_paths)`` and never on the
number of worker threads.  Every start point of an x-ladder reuses the same
variates (common random numbers); the process increments do not depend on
``x``, only the termination by ruin does.

Two engines are used:

* an exact event-driven engine for pure drift and drift plus small compound
  Poisson jumps, where ruin can only happen at jump epochs and payoffs are
  integrated in closed form between events where possible;
* a time-stepping engine for Brownian and Ornstein-Uhlenbeck small
  components, with Brownian-bridge crossing corrections (Brownian) or plain
  endpoint checks (OU, flagged approximate).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import rng as rngmod
from .heavytail import ClaimModel, IntegratedTail, TailModel, Univariate
from .kernels import (DriftBrownian, DriftOnly, DriftSmallJumps, Killing, OrnsteinUhlenbeck)
from .payoffs import (ClaimTail, Constant, Payoff, Penalty, integrate_segments)

log = logging.getLogger(__name__)

CHUNK = 8192
BLOCK = 32
STEP_BLOCK = 64


class NetProfitError(ValueError):
    pass


@dataclass(frozen=True)
class RiskProcessSpec:
    """Full model: drift and small component, claims, killing and payoff."""

    intensity: float
    claims: ClaimModel
    small: object
    kill: Killing
    payoff: Payoff | None = None
    delta: float = 1.0
    dt: float = 0.01

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError("claim intensity must be positive")
        d = self.claims.dimension
        if self.small.drift.size != d:
            raise ValueError(f"drift has dimension {self.small.drift.size}, claims have {d}")
        jumps = getattr(self.small, "jumps", None)
        if jumps is not None and jumps.bound >= self.delta:
            raise ValueError("small jumps must be bounded by delta in absolute value")
        if self.kill.ruin:
            means = self.claims.means
            if np.any(self.drift <= self.intensity * means):
                raise NetProfitError(
                    f"net-profit condition violated: drift {self.drift.tolist()} vs "
                    f"intensity * mean claim {(self.intensity * means).tolist()}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def dimension(self) -> int:
        return self.claims.dimension

    @property
    def drift(self) -> np.ndarray:
        return self.small.drift

    @property
    def rho(self) -> float:
        """Net-profit load ``lam E U / a`` in one dimension."""
        return float(self.intensity * self.claims.means[0] / self.drift[0])

    @property
    def exact(self) -> bool:
        return isinstance(self.small, (DriftOnly, DriftSmallJumps)) or (
            isinstance(self.small, DriftBrownian) and self.small.sigma == 0)

    @property
    def approximate(self) -> bool:
        return isinstance(self.small, OrnsteinUhlenbeck)


@dataclass(frozen=True)
class EstimateCI:
    estimate: float
    stderr: float
    n_paths: int
    seed: int
    x: tuple[float, ...]
    kind: str
    horizon: float = math.inf
    bias_proxy: float = math.nan
    approximate: bool = False

    def within(self, value: float, k: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.estimate - value) <= k * self.stderr + slack


def _estimate(values: np.ndarray, seed: int, x, kind: str, horizon=math.inf,
              bias=math.nan, approximate=False) -> EstimateCI:
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return EstimateCI(mean, se, n, seed, tuple(float(v) for v in np.atleast_1d(x)), kind,
                      float(horizon), float(bias), approximate)


# ---------------------------------------------------------------- per-chunk engines


@dataclass
class ChunkResult:
    integral: np.ndarray   # (k, C)
    ruined: np.ndarray     # (k, C) bool
    tau: np.ndarray        # (k, C)
    pre: np.ndarray        # (k, C, d)
    post: np.ndarray       # (k, C, d)
    events: np.ndarray     # (C,) number of events before the path ended for all starts


def _chunk_sizes(n_paths: int) -> list[int]:
    full, rest = divmod(n_paths, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _kill_times(spec: RiskProcessSpec, seed: int, chunk: int, C: int) -> np.ndarray:
    g = rngmod.stream(seed, chunk, 0, rngmod.KILL)
    e = g.exponential(1.0, C)
    return e / spec.kill.exp_rate if spec.kill.exp_rate > 0 else np.full(C, np.inf)


def _event_block(spec: RiskProcessSpec, seed: int, chunk: int, block: int, C: int, B: int):
    """Inter-arrival times, claim/small flags, claim vectors and small jumps for one block."""
    g = rngmod.stream(seed, chunk, block, rngmod.EVENTS)
    nu = getattr(spec.small, "rate", 0.0)
    Lam = spec.intensity + nu
    E = g.exponential(1.0 / Lam, (C, B))
    d = spec.dimension
    if nu > 0:
        is_claim = g.random((C, B)) < spec.intensity / Lam
    else:
        is_claim = np.ones((C, B), dtype=bool)
    U = spec.claims.sample(g, (C, B)).reshape(C, B, d)
    if nu > 0:
        J = spec.small.jumps.sample(g, (C, B, d))
        jump = np.where(is_claim[..., None], -U, J)
    else:
        jump = -U
    return E, jump, is_claim


def _run_event_chunk(spec: RiskProcessSpec, starts: np.ndarray, seed: int, chunk: int, C: int,
                     horizon: float, want_integral: bool) -> ChunkResult:
    k, d = starts.shape
    a = spec.drift
    ruin = spec.kill.ruin
    if ruin and np.any(a < 0):
        raise ValueError("exact ruin detection needs a non-negative drift")
    cap = np.minimum(_kill_times(spec, seed, chunk, C), horizon)
    integral = np.zeros((k, C))
    ruined = np.zeros((k, C), dtype=bool)
    tau = np.full((k, C), np.inf)
    pre = np.full((k, C, d), np.nan)
    post = np.full((k, C, d), np.nan)
    events = np.zeros(C, dtype=np.int64)
    t = np.zeros(C)
    D = np.zeros((C, d))
    active = np.arange(C)           # paths with time left
    open_ = np.ones((k, C), dtype=bool)  # start s still running on path p
    payoff = spec.payoff
    block = 0
    while active.size:
        E_all, J_all, _ = _event_block(spec, seed, chunk, block, C, BLOCK)
        block += 1
        E, J = E_all[active], J_all[active]
        n = active.size
        ta = t[active]
        ca = cap[active]
        times = ta[:, None] + np.cumsum(E, axis=1)                     # (n, B)
        starts_t = np.concatenate([ta[:, None], times[:, :-1]], axis=1)
        seg_end = np.minimum(times, ca[:, None])
        dur = np.maximum(seg_end - starts_t, 0.0)                      # (n, B)
        occurs = times <= ca[:, None]
        Dpre = D[active][:, None, :] + np.cumsum(a[None, None, :] * E[..., None], axis=1) \
            + np.concatenate([np.zeros((n, 1, d)), np.cumsum(J, axis=1)[:, :-1]], axis=1)
        Dpost = Dpre + J
        Dseg0 = np.concatenate([D[active][:, None, :], Dpost[:, :-1]], axis=1)  # segment start
        for s in range(k):
            op = open_[s, active]
            if not op.any():
                continue
            x0 = starts[s]
            if ruin:
                below = np.any(x0 + Dpost < 0.0, axis=2) & occurs     # (n, B)
                hit = below.any(axis=1) & op
                first = np.where(hit, np.argmax(below, axis=1), BLOCK)
            else:
                hit = np.zeros(n, dtype=bool)
                first = np.full(n, BLOCK)
            if want_integral and payoff is not None:
                use = (np.arange(BLOCK)[None, :] <= first[:, None]) & op[:, None] & (dur > 0)
                ii, jj = np.nonzero(use)
                if ii.size:
                    vals = integrate_segments(payoff, x0 + Dseg0[ii, jj], a, dur[ii, jj])
                    acc = np.zeros(n)
                    np.add.at(acc, ii, vals)
                    integral[s, active] += acc
            if hit.any():
                rows = np.nonzero(hit)[0]
                p_idx = active[rows]
                f = first[rows]
                ruined[s, p_idx] = True
                tau[s, p_idx] = times[rows, f]
                pre[s, p_idx] = x0 + Dpre[rows, f]
                post[s, p_idx] = x0 + Dpost[rows, f]
                open_[s, p_idx] = False
        # advance common state
        events[active] += occurs.sum(axis=1)
        t[active] = times[:, -1]
        D[active] = Dpost[:, -1]
        done = (times[:, -1] >= ca) | ~open_[:, active].any(axis=0)
        active = active[~done]
    return ChunkResult(integral, ruined, tau, pre, post, events)


class _EventFeed:
    """Per-path event variates for engines in which paths consume events at different rates."""

    def __init__(self, spec, seed, chunk, C):
        self.spec, self.seed, self.chunk, self.C = spec, seed, chunk, C
        self.blocks: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def get(self, idx: np.ndarray, counter: np.ndarray):
        b = counter // BLOCK
        col = counter % BLOCK
        E = np.empty(idx.size)
        J = np.empty((idx.size, self.spec.dimension))
        claim = np.empty(idx.size, dtype=bool)
        for blk in np.unique(b):
            if blk not in self.blocks:
                self.blocks[blk] = _event_block(self.spec, self.seed, self.chunk, int(blk), self.C, BLOCK)
            Eb, Jb, Cb = self.blocks[blk]
            m = b == blk
            E[m] = Eb[idx[m], col[m]]
            J[m] = Jb[idx[m], col[m]]
            claim[m] = Cb[idx[m], col[m]]
        return E, J, claim

    def release_below(self, lowest: int):
        for old in [k for k in self.blocks if k < lowest // BLOCK]:
            del self.blocks[old]


def _run_step_chunk(spec: RiskProcessSpec, starts: np.ndarray, seed: int, chunk: int, C: int,
                    horizon: float, want_integral: bool) -> ChunkResult:
    k, d = starts.shape
    small = spec.small
    a = spec.drift
    sigma = float(getattr(small, "sigma", 0.0))
    is_ou = isinstance(small, OrnsteinUhlenbeck)
    theta = float(getattr(small, "theta", 0.0))
    ruin = spec.kill.ruin
    cap = np.minimum(_kill_times(spec, seed, chunk, C), horizon)
    if not np.all(np.isfinite(cap)):
        raise ValueError("time-stepping needs exponential killing or a finite horizon")
    integral = np.zeros((k, C))
    ruined = np.zeros((k, C), dtype=bool)
    tau = np.full((k, C), np.inf)
    pre = np.full((k, C, d), np.nan)
    post = np.full((k, C, d), np.nan)
    events = np.zeros(C, dtype=np.int64)
    feed = _EventFeed(spec, seed, chunk, C)
    counter = np.zeros(C, dtype=np.int64)
    next_t, next_J, next_claim = feed.get(np.arange(C), counter)
    t = np.zeros(C)
    D = np.zeros((C, d))      # common displacement
    V = np.zeros((C, d))      # OU state
    open_ = np.ones((k, C), dtype=bool)
    active = np.arange(C)
    payoff = spec.payoff
    it = 0
    step_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    while active.size:
        blk, col = divmod(it, STEP_BLOCK)
        if blk not in step_cache:
            step_cache.clear()
            g = rngmod.stream(seed, chunk, blk, rngmod.STEPS)
            step_cache[blk] = (g.standard_normal((C, STEP_BLOCK, d)), g.random((C, STEP_BLOCK)))
        Zb, Ub = step_cache[blk]
        Z = Zb[active, col]
        Ubr = Ub[active, col]
        it += 1
        ta = t[active]
        rem = next_t[active] - ta
        to_cap = cap[active] - ta
        lim = np.minimum(spec.dt, to_cap)
        jump_now = rem <= lim
        ends_now = ~jump_now & (to_cap <= spec.dt)
        dt = np.maximum(np.where(jump_now, rem, lim), 0.0)
        D0 = D[active]
        if is_ou:
            V0 = V[active]
            decay = np.exp(theta * dt)[:, None]
            V1 = V0 * decay
            if sigma > 0:
                var = (np.expm1(2.0 * theta * dt) / (2.0 * theta))[:, None]
                V1 = V1 + sigma * np.sqrt(var) * Z
            D1 = D0 + a * dt[:, None] + (V1 - V0)
            V[active] = V1
        else:
            D1 = D0 + a * dt[:, None] + sigma * np.sqrt(dt)[:, None] * Z
        D1j = D1 + np.where(jump_now[:, None], next_J[active], 0.0)
        for s in range(k):
            op = open_[s, active]
            if not op.any():
                continue
            x0 = starts[s]
            X0, X1 = x0 + D0, x0 + D1
            if want_integral and payoff is not None:
                f0 = payoff(X0[op])
                f1 = payoff(X1[op])
                integral[s, active[op]] += 0.5 * (f0 + f1) * dt[op]
            if not ruin:
                continue
            # continuous crossing before the jump
            cont = np.any(X1 < 0, axis=1)
            if sigma > 0 and not is_ou:
                with np.errstate(over="ignore", invalid="ignore"):
                    pc = np.exp(-2.0 * np.maximum(X0, 0) * np.maximum(X1, 0)
                                / (sigma * sigma * np.maximum(dt, 1e-300))[:, None])
                pc = np.where(dt[:, None] > 0, pc, 0.0)
                p_any = 1.0 - np.prod(1.0 - pc, axis=1)
                cont |= Ubr < p_any
            jumped = jump_now & np.any(x0 + D1j < 0, axis=1) & ~cont
            hit = (cont | jumped) & op
            if hit.any():
                rows = np.nonzero(hit)[0]
                pid = active[rows]
                ruined[s, pid] = True
                tau[s, pid] = ta[rows] + dt[rows]
                # creeping ruin: surplus before and deficit at ruin are both zero
                pre[s, pid] = np.where(cont[rows, None], 0.0, X1[rows])
                post[s, pid] = np.where(cont[rows, None], 0.0, x0 + D1j[rows])
                open_[s, pid] = False
        D[active] = D1j
        if is_ou:
            # small jumps belong to V and decay with it; claims act on X directly
            small_now = jump_now & ~next_claim[active]
            if small_now.any():
                V[active[small_now]] += next_J[active[small_now]]
        t[active] = np.where(jump_now, next_t[active], np.where(ends_now, cap[active], ta + dt))
        if jump_now.any():
            jp = active[jump_now]
            events[jp] += 1
            counter[jp] += 1
            E, J, cl = feed.get(jp, counter[jp])
            next_t[jp] = next_t[jp] + E
            next_J[jp] = J
            next_claim[jp] = cl
            feed.release_below(int(counter[active].min()))
        done = ends_now | (t[active] >= cap[active]) | ~open_[:, active].any(axis=0)
        active = active[~done]
    return ChunkResult(integral, ruined, tau, pre, post, events)


def _run(spec: RiskProcessSpec, starts, n_paths: int, seed: int, horizon: float,
         want_integral: bool, workers: int = 1) -> ChunkResult:
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    if starts.shape[1] != spec.dimension:
        starts = starts.reshape(-1, spec.dimension)
    if spec.kill.exp_rate == 0 and not math.isfinite(horizon):
        raise ValueError("ruin without exponential killing needs a finite horizon")
    if n_paths < 2:
        raise ValueError("need at least two paths")
    engine = _run_event_chunk if spec.exact else _run_step_chunk
    sizes = _chunk_sizes(n_paths)

    def job(c):
        return engine(spec, starts, seed, c, sizes[c], horizon, want_integral)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(c) for c in range(len(sizes))]
    return ChunkResult(
        np.concatenate([p.integral for p in parts], axis=1),
        np.concatenate([p.ruined for p in parts], axis=1),
        np.concatenate([p.tau for p in parts], axis=1),
        np.concatenate([p.pre for p in parts], axis=1),
        np.concatenate([p.post for p in parts], axis=1),
        np.concatenate([p.events for p in parts]),
    )


def _late_fraction(ruined: np.ndarray, tau: np.ndarray, horizon: float) -> float:
    n = int(ruined.sum())
    if n == 0 or not math.isfinite(horizon):
        return 0.0
    return float(np.sum(ruined & (tau > 0.5 * horizon)) / n)


def choose_horizon(spec: RiskProcessSpec, starts, seed: int, h0: float | None = None,
                   pilot_paths: int = 20000, threshold: float = 0.02, max_doublings: int = 12,
                   workers: int = 1) -> tuple[float, float]:
    """Double the horizon until fewer than ``threshold`` of pilot ruins fall in its last half."""
    if h0 is None:
        h0 = 50.0 / spec.intensity
    h = float(h0)
    frac = 1.0
    for _ in range(max_doublings + 1):
        r = _run(spec, starts, pilot_paths, seed + 7919, h, False, workers)
        frac = max(_late_fraction(r.ruined[s], r.tau[s], h) for s in range(r.ruined.shape[0]))
        if frac < threshold:
            return h, frac
        h *= 2.0
    log.warning("horizon rule not met after %d doublings (late fraction %.3g)", max_doublings, frac)
    return h / 2.0, frac


# ---------------------------------------------------------------- public estimators


@dataclass(frozen=True)
class PathSkeleton:
    times: np.ndarray
    is_claim: np.ndarray
    jumps: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    kill_time: float
    horizon: float

    @property
    def n_events(self) -> int:
        return self.times.size


def sample_path(spec: RiskProcessSpec, rng: np.random.Generator, horizon: float,
                x=None) -> PathSkeleton:
    """Event skeleton of one path up to ``min(kill time, horizon)`` (ruin is not applied)."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    d = spec.dimension
    x = np.zeros(d) if x is None else np.asarray(x, dtype=float).reshape(d)
    a = spec.drift
    small = spec.small
    nu = getattr(small, "rate", 0.0)
    Lam = spec.intensity + nu
    kill = rng.exponential(1.0 / spec.kill.exp_rate) if spec.kill.exp_rate > 0 else math.inf
    end = min(kill, horizon)
    sigma = float(getattr(small, "sigma", 0.0))
    theta = float(getattr(small, "theta", 0.0))
    times, flags, jumps, pres, posts = [], [], [], [], []
    t, X, V = 0.0, x.copy(), np.zeros(d)
    while True:
        e = rng.exponential(1.0 / Lam)
        if t + e > end:
            break
        t += e
        if isinstance(small, OrnsteinUhlenbeck):
            V1 = V * math.exp(theta * e)
            if sigma > 0:
                V1 = V1 + sigma * math.sqrt(math.expm1(2 * theta * e) / (2 * theta)) * rng.standard_normal(d)
            X = X + a * e + (V1 - V)
            V = V1
        else:
            X = X + a * e
            if sigma > 0:
                X = X + sigma * math.sqrt(e) * rng.standard_normal(d)
        claim = (nu == 0) or (rng.random() < spec.intensity / Lam)
        J = -spec.claims.sample(rng, 1).reshape(d) if claim else small.jumps.sample(rng, d)
        pres.append(X.copy())
        X = X + J
        if isinstance(small, OrnsteinUhlenbeck) and not claim:
            V = V + J
        times.append(t)
        flags.append(claim)
        jumps.append(J)
        posts.append(X.copy())
    sh = (0, d)
    return PathSkeleton(np.array(times), np.array(flags, dtype=bool),
                        np.array(jumps).reshape(-1, d) if jumps else np.zeros(sh),
                        np.array(pres).reshape(-1, d) if pres else np.zeros(sh),
                        np.array(posts).reshape(-1, d) if posts else np.zeros(sh), kill, horizon)


def estimate_potential(spec: RiskProcessSpec, xs, n_paths: int, seed: int,
                       horizon: float = math.inf, workers: int = 1) -> list[EstimateCI]:
    """``E^x int_0^{T} l(X_s) ds`` for every start in ``xs`` (common random numbers)."""
    if spec.payoff is None:
        raise ValueError("estimate_potential needs a payoff")
    xs = np.atleast_2d(np.asarray(xs, dtype=float).reshape(-1, spec.dimension))
    r = _run(spec, xs, n_paths, seed, horizon, True, workers)
    out = []
    for s in range(xs.shape[0]):
        bias = _late_fraction(r.ruined[s], r.tau[s], horizon) if spec.kill.ruin else math.nan
        out.append(_estimate(r.integral[s], seed, xs[s], "potential", horizon, bias, spec.approximate))
    return out


def estimate_potential_expkill(spec: RiskProcessSpec, xs, n_paths: int, seed: int,
                               workers: int = 1) -> list[EstimateCI]:
    if spec.kill.ruin or spec.kill.exp_rate <= 0:
        raise ValueError("estimate_potential_expkill needs pure exponential killing")
    return estimate_potential(spec, xs, n_paths, seed, math.inf, workers)


def _ruin_spec(spec: RiskProcessSpec) -> RiskProcessSpec:
    if not spec.kill.ruin:
        raise ValueError("spec must kill on ruin")
    return spec


def estimate_ruin(spec: RiskProcessSpec, xs, n_paths: int, seed: int,
                  horizon: float | str = "auto", workers: int = 1) -> list[EstimateCI]:
    """Finite-horizon ruin probabilities ``P(tau <= horizon)`` on an x-ladder."""
    spec = _ruin_spec(spec)
    xs = np.atleast_2d(np.asarray(xs, dtype=float).reshape(-1, spec.dimension))
    if horizon == "auto":
        horizon, _ = choose_horizon(spec, xs, seed, workers=workers)
    r = _run(spec, xs, n_paths, seed, float(horizon), False, workers)
    out = []
    for s in range(xs.shape[0]):
        out.append(_estimate(r.ruined[s].astype(float), seed, xs[s], "ruin_direct", horizon,
                             _late_fraction(r.ruined[s], r.tau[s], horizon), spec.approximate))
    return out


def estimate_ruin_1d(spec: RiskProcessSpec, xs, n_paths: int, seed: int,
                     horizon: float | str = "auto", workers: int = 1) -> list[EstimateCI]:
    if spec.dimension != 1:
        raise ValueError("estimate_ruin_1d needs a one-dimensional model")
    return estimate_ruin(spec, xs, n_paths, seed, horizon, workers)


@dataclass(frozen=True)
class QuadrantRuinEstimate:
    direct: EstimateCI
    compensation: EstimateCI
    paired_stderr: float

    @property
    def combined_sigma(self) -> float:
        return math.hypot(self.direct.stderr, self.compensation.stderr)

    @property
    def z(self) -> float:
        s = self.combined_sigma
        return abs(self.direct.estimate - self.compensation.estimate) / s if s > 0 else 0.0

    def agree(self, k: float = 3.0) -> bool:
        return self.z <= k


def estimate_quadrant_ruin(spec: RiskProcessSpec, xs, n_paths: int, seed: int,
                           horizon: float | str = "auto", workers: int = 1) -> list[QuadrantRuinEstimate]:
    """Direct indicator and compensation (``int lam Fbar(X_s) ds``) estimators on the same paths."""
    spec = _ruin_spec(spec)
    comp_payoff = ClaimTail(spec.intensity, spec.claims)
    sp = replace(spec, payoff=comp_payoff)
    xs = np.atleast_2d(np.asarray(xs, dtype=float).reshape(-1, spec.dimension))
    if horizon == "auto":
        horizon, _ = choose_horizon(sp, xs, seed, workers=workers)
    r = _run(sp, xs, n_paths, seed, float(horizon), True, workers)
    out = []
    for s in range(xs.shape[0]):
        ind = r.ruined[s].astype(float)
        bias = _late_fraction(r.ruined[s], r.tau[s], horizon)
        d = _estimate(ind, seed, xs[s], "ruin_direct", horizon, bias, spec.approximate)
        c = _estimate(r.integral[s], seed, xs[s], "ruin_compensation", horizon, bias, spec.approximate)
        paired = float(np.std(ind - r.integral[s], ddof=1) / math.sqrt(ind.size))
        out.append(QuadrantRuinEstimate(d, c, paired))
    return out


def estimate_gerber_shiu(spec: RiskProcessSpec, penalty: Penalty, q: float, xs, n_paths: int,
                         seed: int, horizon: float | str = "auto", workers: int = 1) -> list[EstimateCI]:
    """``E^x[e^{-q tau} w(X_{tau-}, |X_tau|); tau <= horizon]`` by direct simulation."""
    if spec.dimension != 1:
        raise ValueError("Gerber-Shiu functionals are one-dimensional")
    if q < 0:
        raise ValueError("discount must be non-negative")
    sp = replace(spec, kill=Killing(0.0, True))
    xs = np.atleast_2d(np.asarray(xs, dtype=float).reshape(-1, 1))
    if horizon == "auto":
        horizon, _ = choose_horizon(sp, xs, seed, workers=workers)
    r = _run(sp, xs, n_paths, seed, float(horizon), False, workers)
    out = []
    for s in range(xs.shape[0]):
        hit = r.ruined[s]
        val = np.zeros(hit.size)
        if hit.any():
            disc = np.exp(-q * r.tau[s][hit])
            val[hit] = disc * np.asarray(penalty(r.pre[s][hit, 0], -r.post[s][hit, 0]))
        out.append(_estimate(val, seed, xs[s], "gerber_shiu_direct", horizon,
                             _late_fraction(hit, r.tau[s], horizon), spec.approximate))
    return out


def gerber_shiu_compensation(spec: RiskProcessSpec, penalty: Penalty, q: float, xs, n_paths: int,
                             seed: int, horizon: float | str = "auto",
                             workers: int = 1) -> list[EstimateCI]:
    """Potential of the compensating payoff under exponential killing at ``q`` plus ruin."""
    comp = penalty.compensator(spec.intensity, spec.claims)
    if comp is None:
        raise ValueError("penalty has no closed-form compensator")
    sp = replace(spec, kill=Killing(q, True), payoff=comp)
    xs = np.atleast_2d(np.asarray(xs, dtype=float).reshape(-1, 1))
    if horizon == "auto":
        horizon, _ = choose_horizon(sp, xs, seed, workers=workers)
    res = estimate_potential(sp, xs, n_paths, seed, float(horizon), workers)
    return [replace(e, kind="gerber_shiu_compensation") for e in res]


def estimate_dual_tail(claim: TailModel, intensity: float, drift: float, xs, n_paths: int,
                       seed: int) -> list[EstimateCI]:
    """``P(S > x)`` for ``S`` a geometric sum of integrated-tail variables (the dual maximum)."""
    rho = intensity * claim.mean / drift
    if not rho < 1:
        raise NetProfitError("net-profit condition violated")
    FI = IntegratedTail(claim)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    vals = []
    for c, C in enumerate(_chunk_sizes(n_paths)):
        g = rngmod.stream(seed, c, 0, rngmod.DUAL)
        K = g.geometric(1.0 - rho, C) - 1
        total = int(K.sum())
        eta = np.asarray(FI.sample(g, total)) if total else np.zeros(0)
        S = np.bincount(np.repeat(np.arange(C), K), weights=eta, minlength=C)
        vals.append(S)
    S = np.concatenate(vals)
    return [_estimate((S > x).astype(float), seed, [x], "dual_maximum") for x in xs]


__all__ = [
    "RiskProcessSpec", "EstimateCI", "NetProfitError", "PathSkeleton", "QuadrantRuinEstimate",
    "sample_path", "estimate_potential", "estimate_potential_expkill", "estimate_ruin",
    "estimate_ruin_1d", "estimate_quadrant_ruin", "estimate_gerber_shiu",
    "gerber_shiu_compensation", "estimate_dual_tail", "choose_horizon", "Constant", "Univariate",
]
