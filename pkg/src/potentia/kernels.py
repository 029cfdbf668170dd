"""Renewal kernels ``G(dz)`` and the occupation density ``q`` for killed risk processes.

Under independent exponential killing at rate ``mu`` the first claim epoch
restarts the process, which gives a translation-invariant kernel

    G(dz) = int F(dz + w) q(w) dw,   q(w) = int_0^inf lam e^{-(lam+mu) s} p_s(w) ds,

of total mass ``lam / (lam + mu)``, where ``p_s`` is the law of the small
component after time ``s``.  For pure drift the tail is a one-dimensional time
integral, evaluated here by composite Simpson quadrature.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from .heavytail import TailModel
from .renewal import Grid, GridMeasure, convolve, discretize, discretize_tail


class UnsupportedComponentError(ValueError):
    pass


class QuadratureError(ArithmeticError):
    pass


class DegenerateFitError(ValueError):
    pass


# ---------------------------------------------------------------- model pieces


@dataclass(frozen=True)
class UniformJumps:
    """Small-jump law, uniform on ``[low, high]``."""

    low: float
    high: float

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("uniform jump law needs high > low")

    @property
    def atoms(self):
        return ()

    @property
    def bound(self) -> float:
        return max(abs(self.low), abs(self.high))

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def continuous_tail(self, z):
        z = np.asarray(z, dtype=float)
        return np.clip((self.high - z) / (self.high - self.low), 0.0, 1.0)

    def tail(self, z):
        return self.continuous_tail(z)

    def sample(self, rng: np.random.Generator, size=None):
        return self.low + (self.high - self.low) * rng.random(size)


def _vec(a) -> np.ndarray:
    return np.atleast_1d(np.asarray(a, dtype=float))


@dataclass(frozen=True)
class DriftOnly:
    a: Any
    kind: str = field(default="drift_only", init=False)

    @property
    def drift(self) -> np.ndarray:
        return _vec(self.a)


@dataclass(frozen=True)
class DriftBrownian:
    a: Any
    sigma: float
    kind: str = field(default="drift_brownian", init=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @property
    def drift(self) -> np.ndarray:
        return _vec(self.a)


@dataclass(frozen=True)
class DriftSmallJumps:
    a: Any
    rate: float
    jumps: UniformJumps
    kind: str = field(default="drift_small_jumps", init=False)

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("small-jump rate must be non-negative")

    @property
    def drift(self) -> np.ndarray:
        return _vec(self.a)


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """``X = x + a t + V`` with ``dV = theta V dt + sigma dB + dZ_small``."""

    a: Any
    theta: float
    rate: float
    jumps: UniformJumps
    sigma: float = 0.0
    kind: str = field(default="ou", init=False)

    def __post_init__(self):
        if not self.theta < 0:
            raise ValueError("OU reversion rate theta must be strictly negative")
        if self.jumps.low < 0:
            raise ValueError("OU small jumps must be positive")

    @property
    def drift(self) -> np.ndarray:
        return _vec(self.a)


SmallComponent = DriftOnly | DriftBrownian | DriftSmallJumps | OrnsteinUhlenbeck


@dataclass(frozen=True)
class Killing:
    """Exponential killing at ``exp_rate`` and/or killing on leaving ``[0, inf)^d``."""

    exp_rate: float = 0.0
    ruin: bool = False

    def __post_init__(self):
        if self.exp_rate < 0:
            raise ValueError("killing rate must be non-negative")
        if self.exp_rate == 0 and not self.ruin:
            raise ValueError("no killing specified")

    @property
    def kind(self) -> str:
        if self.ruin and self.exp_rate > 0:
            return "exp_and_ruin"
        return "ruin" if self.ruin else "exp"


def ExpKill(mu: float) -> Killing:
    if not mu > 0:
        raise ValueError("ExpKill needs mu > 0")
    return Killing(mu, False)


def FirstPassageRuin(discount: float = 0.0) -> Killing:
    return Killing(discount, True)


QuadrantExit = FirstPassageRuin


def _scalar_drift(small) -> float:
    d = small.drift
    if d.size != 1:
        raise UnsupportedComponentError("kernels are built for one-dimensional models only")
    return float(d[0])


def _require_expkill(kill: Killing) -> float:
    if kill.ruin or kill.exp_rate <= 0:
        raise UnsupportedComponentError("kernels need state-independent exponential killing")
    return kill.exp_rate


# ---------------------------------------------------------------- q


def q_function(lam: float, small, kill: Killing, w):
    """Density of ``int lam e^{-(lam+mu)s} P(Y_s in dw) ds`` for one-dimensional ``Y``."""
    mu = _require_expkill(kill)
    kappa = lam + mu
    w = np.asarray(w, dtype=float)
    a = _scalar_drift(small)
    if isinstance(small, DriftBrownian) and small.sigma > 0:
        s2 = small.sigma ** 2
        root = math.sqrt(a * a + 2.0 * kappa * s2)
        out = lam / root * np.exp((a * w - np.abs(w) * root) / s2)
    elif isinstance(small, (DriftOnly, DriftBrownian)):
        if a == 0:
            raise UnsupportedComponentError("zero drift: q is a point mass at 0; use q_measure")
        out = np.where(w / a > 0, lam / abs(a) * np.exp(-kappa * w / a), 0.0)
    else:
        raise UnsupportedComponentError(f"q has no closed form for {small.kind}")
    return out if out.ndim else float(out)


def _exp_cell_masses(edges: np.ndarray, amp: float, rate: float, side: int) -> np.ndarray:
    """Cell masses of ``amp * exp(-rate |w|)`` restricted to one side of 0."""
    if side > 0:
        e = np.clip(edges, 0.0, None)
    else:
        e = np.clip(-edges[::-1], 0.0, None)
    F = amp / rate * -np.expm1(-rate * e)  # integral from 0 to e
    m = np.diff(F)
    return m if side > 0 else m[::-1]


def q_measure(lam: float, small, kill: Killing, step: float, cutoff: float = 45.0) -> GridMeasure:
    """The measure ``q(w) dw`` with exact cell masses, hat-assigned to a lattice."""
    mu = _require_expkill(kill)
    kappa = lam + mu
    a = _scalar_drift(small)
    if isinstance(small, DriftBrownian) and small.sigma > 0:
        s2 = small.sigma ** 2
        root = math.sqrt(a * a + 2.0 * kappa * s2)
        amp = lam / root
        r_pos, r_neg = (root - a) / s2, (root + a) / s2
        hi = math.ceil(cutoff / r_pos / step) * step
        lo = -math.ceil(cutoff / r_neg / step) * step
        grid = Grid(step, hi, lo)
        edges = grid.nodes
        cell = _exp_cell_masses(edges, amp, r_pos, +1) + _exp_cell_masses(edges, amp, r_neg, -1)
        tail_hi = amp / r_pos * math.exp(-r_pos * hi)
        tail_lo = amp / r_neg * math.exp(r_neg * lo)
        return GridMeasure(grid, _hat(cell), (), tail_lo, tail_hi)
    if isinstance(small, (DriftOnly, DriftBrownian)):
        if a == 0:
            grid = Grid(step, step, -step)
            return GridMeasure(grid, np.zeros(3), ((0.0, lam / kappa),))
        rate = kappa / abs(a)
        span = math.ceil(cutoff / rate / step) * step
        if a > 0:
            grid = Grid(step, span, 0.0)
            cell = _exp_cell_masses(grid.nodes, lam / abs(a), rate, +1)
            return GridMeasure(grid, _hat(cell), (), 0.0, lam / kappa * math.exp(-rate * span))
        grid = Grid(step, 0.0, -span)
        cell = _exp_cell_masses(grid.nodes, lam / abs(a), rate, -1)
        return GridMeasure(grid, _hat(cell), (), lam / kappa * math.exp(-rate * span), 0.0)
    if isinstance(small, DriftSmallJumps):
        return _small_jump_q_measure(lam, kappa, a, small, step, cutoff)
    raise UnsupportedComponentError(f"q measure not offered for {small.kind}")


def _hat(cell: np.ndarray) -> np.ndarray:
    w = np.zeros(cell.size + 1)
    w[:-1] += 0.5 * cell
    w[1:] += 0.5 * cell
    return w


def _small_jump_q_measure(lam, kappa, a, small: DriftSmallJumps, step, cutoff) -> GridMeasure:
    nu = small.rate
    tot = kappa + nu
    p = nu / tot
    m_max = 0 if nu == 0 else int(math.ceil(math.log(1e-18) / math.log(p))) + 1
    bound = small.jumps.bound
    reach_a = 0.0
    if a != 0:
        # gamma(m+1, tot/|a|) tails are negligible beyond (m + cutoff) |a| / tot
        reach_a = (m_max + 1 + cutoff + 6.0 * math.sqrt(m_max + 1)) * abs(a) / tot
    pad = m_max * bound / step + 2
    hi = math.ceil((reach_a if a > 0 else 0.0) / step + pad) * step
    lo = -math.ceil((reach_a if a < 0 else 0.0) / step + pad) * step
    grid = Grid(step, hi, lo)
    jgrid = Grid(step, math.ceil(bound / step + 1) * step, -math.ceil(bound / step + 1) * step)
    J = discretize(small.jumps, jgrid)
    acc = np.zeros(grid.n)
    atoms: list[tuple[float, float]] = []
    lost_lo = lost_hi = 0.0
    powJ = GridMeasure(grid, np.zeros(grid.n), ((0.0, 1.0),))
    for m in range(m_max + 1):
        mass_m = lam / tot * p ** m
        if a == 0:
            R = GridMeasure(grid, np.zeros(grid.n), ((0.0, mass_m),))
        else:
            x = grid.nodes / a  # time at each node
            cdf = special.gammainc(m + 1, np.clip(x, 0.0, None) * tot)
            cell = mass_m * np.abs(np.diff(cdf))
            R = GridMeasure(grid, _hat(cell))
            miss = mass_m - R.total_mass
            if a > 0:
                R = GridMeasure(grid, R.weights, (), 0.0, max(miss, 0.0))
            else:
                R = GridMeasure(grid, R.weights, (), max(miss, 0.0), 0.0)
        term = convolve(R, powJ, grid)
        acc += term.dense()
        lost_lo += term.lost_low
        lost_hi += term.lost_high
        if m < m_max:
            powJ = convolve(powJ, GridMeasure(grid, _regrid(J, grid)), grid)
    return GridMeasure(grid, acc, tuple(atoms), lost_lo, lost_hi)


def _regrid(m: GridMeasure, dst: Grid) -> np.ndarray:
    w = m.dense()
    out = np.zeros(dst.n)
    idx = m.grid.origin + np.arange(w.size) - dst.origin
    ok = (idx >= 0) & (idx < dst.n)
    out[idx[ok]] = w[ok]
    return out


def reflect(m: GridMeasure) -> GridMeasure:
    """Law of ``-W`` for a measure of ``W``."""
    g = m.grid
    grid = Grid(g.step, -g.x_min, -g.x_max)
    return GridMeasure(grid, m.weights[::-1], tuple((-l, w) for l, w in m.atoms),
                       m.lost_high, m.lost_low)


# ---------------------------------------------------------------- kernel


@dataclass(frozen=True)
class KernelG:
    measure: GridMeasure
    rho: float
    provenance: dict
    error_bound: float = 0.0

    @property
    def mass(self) -> float:
        return self.measure.mass

    def normalized(self) -> GridMeasure:
        return self.measure.scaled(1.0 / self.measure.mass)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# potentia-csv v1\n")
        prov = dict(self.provenance)
        prov.update(mass=self.mass, lost_low=self.measure.lost_low,
                    lost_high=self.measure.lost_high, rho=self.rho, error_bound=self.error_bound)
        buf.write("# " + json.dumps(prov, sort_keys=True, default=str) + "\n")
        buf.write("z,weight\n")
        for z, w in zip(self.measure.grid.nodes, self.measure.dense()):
            buf.write(f"{z:.10g},{w:.17g}\n")
        return buf.getvalue()


def _simpson_weights(n: int) -> np.ndarray:
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _graded_simpson(fn, t0: np.ndarray, t1: np.ndarray, panels: int, power: float,
                    cluster_at_start: bool):
    """Simpson on ``[t0, t1]`` per row after ``t = t0 + (t1-t0) v^p`` (or mirrored).

    Returns the integral and a Richardson error estimate from the half-panel rule.
    """
    v = np.linspace(0.0, 1.0, panels + 1)
    L = (t1 - t0)[:, None]
    if cluster_at_start:
        t = t0[:, None] + L * v ** power
        jac = L * power * v ** (power - 1.0)
    else:
        t = t1[:, None] - L * v ** power
        jac = L * power * v ** (power - 1.0)
    f = fn(t) * jac
    h = 1.0 / panels
    full = f @ _simpson_weights(panels) * h
    half = f[:, ::2] @ _simpson_weights(panels // 2) * (2.0 * h)
    return full, np.abs(full - half) / 15.0


def drift_only_tail(lam: float, mu: float, a: float, claim: TailModel, z: np.ndarray,
                    panels: int = 4096, t_max_factor: float = 40.0, chunk: int = 256):
    """``int_0^{t_max} lam e^{-(lam+mu) t} Fbar(z + a t) dt`` at each ``z`` with an error estimate."""
    kappa = lam + mu
    T = t_max_factor / kappa
    z = np.atleast_1d(np.asarray(z, dtype=float))
    atoms = claim.atoms
    c_tot = 1.0 - sum(m for _, m in atoms)
    delta = claim.delta
    out = np.zeros_like(z)
    err = np.zeros_like(z)
    pref = lam / kappa
    if a == 0:
        return pref * -math.expm1(-kappa * T) * np.asarray(claim.tail(z)), err
    for s in range(0, z.size, chunk):
        zz = z[s:s + chunk]
        # F is flat (equal to c_tot) while z + a t < delta
        tk = np.clip((delta - zz) / a, 0.0, T)
        integrand = lambda t, zz=zz: lam * np.exp(-kappa * t) * claim.continuous_tail(zz[:, None] + a * t)
        if a > 0:
            flat = c_tot * pref * -np.expm1(-kappa * tk)
            val, e = _graded_simpson(integrand, tk, np.full_like(zz, T), panels, 4.0, True)
        else:
            flat = c_tot * pref * (np.exp(-kappa * tk) - math.exp(-kappa * T))
            val, e = _graded_simpson(integrand, np.zeros_like(zz), tk, panels, 4.0, False)
        at = np.zeros_like(zz)
        for loc, m in atoms:
            if a > 0:
                ta = np.clip((loc - zz) / a, 0.0, T)
                at += m * pref * -np.expm1(-kappa * ta)
            else:
                ta = np.clip((zz - loc) / -a, 0.0, T)
                at += m * pref * (np.exp(-kappa * ta) - math.exp(-kappa * T))
        out[s:s + chunk] = flat + val + at
        err[s:s + chunk] = e
    return out, err


def build_kernel(lam: float, claim: TailModel, small, kill: Killing, grid: Grid,
                 panels: int = 4096, t_max_factor: float = 40.0, tol: float = 1e-7) -> KernelG:
    """Discretized kernel on ``grid`` (which may extend below 0)."""
    mu = _require_expkill(kill)
    if lam <= 0:
        raise ValueError("claim intensity must be positive")
    kappa = lam + mu
    rho = lam / kappa
    a = _scalar_drift(small)
    prov: dict[str, Any] = {"lam": lam, "mu": mu, "claim": repr(claim), "small": repr(small),
                            "step": grid.step, "x_min": grid.x_min, "x_max": grid.x_max}
    if isinstance(small, DriftOnly) or (isinstance(small, DriftBrownian) and small.sigma == 0):
        T = t_max_factor / kappa
        tail_vals, err = drift_only_tail(lam, mu, a, claim, grid.nodes, panels, t_max_factor)
        # mass under the same truncation: the claim law integrates to one
        total = rho * -math.expm1(-kappa * T)
        bound = float(err.max(initial=0.0))
        if bound > tol:
            raise QuadratureError(f"quadrature error {bound:.3g} exceeds tolerance {tol:.3g}")
        meas = discretize_tail(lambda _nodes: tail_vals, grid, total)
        prov.update(method="time_quadrature_simpson", panels=panels, t_max=T,
                    truncated_time_mass=rho * math.exp(-kappa * T))
        return KernelG(meas, rho, prov, bound)
    if isinstance(small, (DriftBrownian, DriftSmallJumps)):
        Q = q_measure(lam, small, kill, grid.step)
        negW = reflect(Q)
        span_hi = grid.x_max - negW.grid.x_min
        fgrid = Grid(grid.step, max(math.ceil(span_hi / grid.step), 1) * grid.step, 0.0)
        F = discretize(claim, fgrid)
        meas = convolve(F, negW, grid)
        prov.update(method="q_measure_convolution", q_grid=[negW.grid.x_min, negW.grid.x_max])
        return KernelG(meas, rho, prov, 0.0)
    raise UnsupportedComponentError("kernel construction not offered for OU; simulation only")


def forcing_term(lam: float, small, kill: Killing, payoff, x, step: float = 0.01,
                 nodes: int = 4096) -> np.ndarray:
    """``h(x) = E^x int_0^{tau_1 ^ T} l(X_s) ds``: payoff accrued before the first claim.

    For pure drift the time integral is taken in the variable
    ``s = 1 - exp(-(lam + mu) t)`` with a midpoint rule on ``nodes`` points;
    with a Brownian part ``h = (1/lam) int l(x + w) q(w) dw`` on the
    lattice of ``q_measure``.
    """
    mu = _require_expkill(kill)
    kappa = lam + mu
    a = _scalar_drift(small)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.size)
    if isinstance(small, DriftOnly) or (isinstance(small, DriftBrownian) and small.sigma == 0):
        if a == 0:
            return np.asarray(payoff(x[:, None]), dtype=float) / kappa
        s = (np.arange(nodes) + 0.5) / nodes
        t = -np.log1p(-s) / kappa
        for lo in range(0, x.size, 256):
            xb = x[lo:lo + 256]
            pts = (xb[:, None] + a * t[None, :]).reshape(-1, 1)
            out[lo:lo + 256] = payoff(pts).reshape(xb.size, nodes).mean(axis=1) / kappa
        return out
    if isinstance(small, DriftBrownian):
        Q = q_measure(lam, small, kill, step)
        keep = Q.weights > 0
        w, m = Q.grid.nodes[keep], Q.weights[keep]
        for lo in range(0, x.size, 256):
            xb = x[lo:lo + 256]
            pts = (xb[:, None] + w[None, :]).reshape(-1, 1)
            out[lo:lo + 256] = payoff(pts).reshape(xb.size, w.size) @ m / lam
        return out
    raise UnsupportedComponentError(f"forcing term not offered for {small.kind}")


# ---------------------------------------------------------------- decay fit


@dataclass(frozen=True)
class DecayFit:
    theta: float
    intercept: float
    r2: float
    n_points: int
    theta_q: float | None = None
    note: str = ""


def theta_q(lam: float, a: float, theta_nu: float) -> float:
    """Decay constant bound ``min(theta_nu, lam / (2|a|))``."""
    return min(theta_nu, lam / (2.0 * abs(a))) if a != 0 else theta_nu


def decay_rate_fit(w, q, window: tuple[float, float] | None = None,
                   theta_reference: float | None = None) -> DecayFit:
    """Least-squares slope of ``-log q`` against ``|w|``."""
    w = np.abs(np.asarray(w, dtype=float))
    q = np.asarray(q, dtype=float)
    keep = np.isfinite(q) & (q > 1e-300)
    if window is not None:
        keep &= (w >= window[0]) & (w <= window[1])
    if keep.sum() < 10:
        raise DegenerateFitError("degenerate fit: fewer than 10 usable points")
    x, y = w[keep], -np.log(q[keep])
    if np.ptp(x) == 0 or np.ptp(y) < 1e-12:
        raise DegenerateFitError("degenerate fit: q is constant on the window")
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0
    note = ""
    if theta_reference is not None:
        note = f"theta_est/theta_ref = {slope / theta_reference:.4f}"
    return DecayFit(float(slope), float(-icpt), r2, int(keep.sum()), theta_reference, note)
