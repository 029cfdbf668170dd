"""Grid measures and solvers for defective renewal equations ``u = h + u * G``.

Measures live on uniform node grids.  A continuous law is assigned to nodes by
linear (hat) mass splitting: each grid cell's mass is shared equally by its
two end nodes, so total mass is preserved exactly.  Unknowns ``u`` of a
renewal problem sit at cell centres of the solution domain, which keeps a
jump of ``u`` at the domain edge away from the evaluation points.

Mass pushed beyond a grid is never dropped: it is booked as ``lost_low`` or
``lost_high`` on the measure and shows up in ``tail``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

_ALIGN_TOL = 1e-9


class GridMismatchError(ValueError):
    pass


class RenewalConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: Sequence[float]):
        super().__init__(f"{message}; residual trace tail: {list(trace)[-5:]}")
        self.trace = list(trace)


@dataclass(frozen=True)
class Grid:
    """Uniform nodes ``x_min, x_min + step, ..., x_max``."""

    step: float
    x_max: float
    x_min: float = 0.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        span = (self.x_max - self.x_min) / self.step
        if span < 1 - _ALIGN_TOL or abs(span - round(span)) > 1e-6:
            raise ValueError("grid extent must be a positive multiple of the step")
        o = self.x_min / self.step
        if abs(o - round(o)) > 1e-6:
            raise ValueError("x_min must be a multiple of the step")

    @property
    def n(self) -> int:
        return int(round((self.x_max - self.x_min) / self.step)) + 1

    @property
    def origin(self) -> int:
        """Index of ``x_min`` on the infinite lattice ``step * Z``."""
        return int(round(self.x_min / self.step))

    @property
    def nodes(self) -> np.ndarray:
        return (self.origin + np.arange(self.n)) * self.step

    @property
    def centers(self) -> np.ndarray:
        return (self.origin + np.arange(self.n - 1) + 0.5) * self.step

    def same_lattice(self, other: "Grid") -> bool:
        return abs(self.step - other.step) <= _ALIGN_TOL * self.step

    def minkowski(self, other: "Grid") -> "Grid":
        return Grid(self.step, self.x_max + other.x_max, self.x_min + other.x_min)


@dataclass(frozen=True)
class GridMeasure:
    """Sub-probability measure: node weights plus exact atoms plus booked overflow."""

    grid: Grid
    weights: np.ndarray
    atoms: tuple[tuple[float, float], ...] = ()
    lost_low: float = 0.0
    lost_high: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.grid.n,):
            raise ValueError("weights must match the grid")
        if np.any(w < -1e-15):
            raise ValueError("weights must be non-negative")
        w = np.maximum(w, 0.0)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        kept, lo, hi = [], float(self.lost_low), float(self.lost_high)
        for loc, m in self.atoms:
            if m <= 0:
                continue
            if loc < self.grid.x_min - 1e-12:
                lo += m
            elif loc > self.grid.x_max + 1e-12:
                hi += m
            else:
                kept.append((float(loc), float(m)))
        object.__setattr__(self, "atoms", tuple(sorted(kept)))
        object.__setattr__(self, "lost_low", lo)
        object.__setattr__(self, "lost_high", hi)

    @property
    def total_mass(self) -> float:
        """Mass on the grid (weights plus atoms)."""
        return float(self.weights.sum() + sum(m for _, m in self.atoms))

    @property
    def lost(self) -> float:
        return self.lost_low + self.lost_high

    @property
    def mass(self) -> float:
        """Grid mass plus booked overflow."""
        return self.total_mass + self.lost

    def dense(self) -> np.ndarray:
        """Node weights with atoms split linearly onto neighbouring nodes."""
        out = self.weights.copy()
        g = self.grid
        for loc, m in self.atoms:
            pos = (loc - g.x_min) / g.step
            j = int(math.floor(pos + 1e-9))
            frac = pos - j
            if frac < 1e-9 or j >= g.n - 1:
                out[min(j, g.n - 1)] += m
            else:
                out[j] += m * (1.0 - frac)
                out[j + 1] += m * frac
        return out

    def tail(self, x):
        """Mass strictly above ``x``; node weights are read as hat densities of half-width one step."""
        x = np.asarray(x, dtype=float)
        g = self.grid
        w = self.weights
        above = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])  # above[m] = sum_{j>=m} w_j
        W = np.concatenate([[0.0], w, [0.0]])  # node j at W[j + 1]
        pos = (x - g.x_min) / g.step
        k = np.floor(pos + 1e-12).astype(int)
        f = np.clip(pos - k, 0.0, 1.0)
        kc = np.clip(k, -1, g.n - 1)
        part = (above[np.clip(kc + 2, 0, g.n)]
                + W[kc + 1] * 0.5 * (1.0 - f) ** 2
                + W[kc + 2] * (1.0 - 0.5 * f * f))
        cont = np.where(k < -1, above[0], np.where(k >= g.n, 0.0, part))
        at = np.zeros_like(x)
        for loc, m in self.atoms:
            at = at + m * (loc > x)
        out = cont + at + self.lost_high
        return out if out.ndim else float(out)

    def node_tail(self) -> np.ndarray:
        """Mass strictly above each node, counting half of the node's own weight."""
        w = self.dense()
        above = np.cumsum(w[::-1])[::-1]
        return above - 0.5 * w + self.lost_high

    def scaled(self, c: float) -> "GridMeasure":
        return GridMeasure(self.grid, self.weights * c, tuple((l, m * c) for l, m in self.atoms),
                           self.lost_low * c, self.lost_high * c)


def point_mass(grid: Grid, loc: float = 0.0, mass: float = 1.0) -> GridMeasure:
    return GridMeasure(grid, np.zeros(grid.n), ((loc, mass),))


def _hat_weights(cell_mass: np.ndarray) -> np.ndarray:
    n = cell_mass.size + 1
    w = np.zeros(n)
    w[:-1] += 0.5 * cell_mass
    w[1:] += 0.5 * cell_mass
    return w


def discretize_tail(tail_fn: Callable[[np.ndarray], np.ndarray], grid: Grid, total_mass: float,
                    atoms: Sequence[tuple[float, float]] = ()) -> GridMeasure:
    """Hat-weight discretization of a continuous measure given by its tail function."""
    t = np.asarray(tail_fn(grid.nodes), dtype=float)
    cell = np.maximum(t[:-1] - t[1:], 0.0)
    lost_low = max(total_mass - float(t[0]), 0.0)
    return GridMeasure(grid, _hat_weights(cell), tuple(atoms), lost_low, float(t[-1]))


def discretize(law, grid: Grid, scale: float = 1.0) -> GridMeasure:
    """Discretize a one-dimensional law (anything with ``continuous_tail`` and ``atoms``)."""
    atoms = tuple((loc, scale * m) for loc, m in law.atoms)
    cont_total = scale * (1.0 - sum(m for _, m in law.atoms))
    return discretize_tail(lambda z: scale * np.asarray(law.continuous_tail(z)), grid,
                           cont_total, atoms)


def _check_lattice(a: GridMeasure, b: GridMeasure):
    if not a.grid.same_lattice(b.grid):
        raise GridMismatchError(f"grid mismatch: steps {a.grid.step} and {b.grid.step}")


def convolve(a: GridMeasure, b: GridMeasure, out_grid: Grid | None = None) -> GridMeasure:
    """Convolution on a shared lattice; overflow beyond ``out_grid`` is booked, not dropped.

    ``out_grid`` defaults to ``a.grid``.  Atoms whose sum is representable on
    the output grid stay atoms; otherwise they are split onto nodes.
    """
    _check_lattice(a, b)
    out = a.grid if out_grid is None else out_grid
    if not out.same_lattice(a.grid):
        raise GridMismatchError("output grid must share the lattice")
    # continuous x continuous, continuous x atoms, atoms x atoms
    wa, wb = a.weights, b.weights
    full = np.convolve(wa, wb)
    full_origin = a.grid.origin + b.grid.origin
    atoms: list[tuple[float, float]] = []
    for la, ma in a.atoms:
        for lb, mb in b.atoms:
            atoms.append((la + lb, ma * mb))
    # atoms of one factor shift the other factor's continuous part
    for src_atoms, w, g in ((a.atoms, wb, b.grid), (b.atoms, wa, a.grid)):
        for loc, m in src_atoms:
            shift = loc / g.step
            j = int(math.floor(shift + 1e-9))
            frac = shift - j
            for off, share in ((j, 1.0 - frac), (j + 1, frac)):
                if share <= 1e-12:
                    continue
                seg_origin = g.origin + off
                lo = seg_origin - full_origin
                if lo < 0:
                    full = np.concatenate([np.zeros(-lo), full])
                    full_origin += lo
                    lo = 0
                hi = lo + w.size
                if hi > full.size:
                    full = np.concatenate([full, np.zeros(hi - full.size)])
                full[lo:hi] += m * share * w
    # clip to output grid
    start = out.origin - full_origin
    idx = np.arange(full.size) - start
    inside = (idx >= 0) & (idx < out.n)
    weights = np.zeros(out.n)
    weights[idx[inside]] = full[inside]
    low = float(full[idx < 0].sum())
    high = float(full[idx >= out.n].sum())
    # overflow of the factors propagates: lost mass times everything else
    ma, mb = a.total_mass, b.total_mass
    high += a.lost_high * (mb + b.lost) + b.lost_high * (ma + a.lost_low)
    low += a.lost_low * (mb + b.lost_low) + b.lost_low * ma
    # a.lost_low x b.lost_high has unknown sign: booked high (conservative for tails)
    return GridMeasure(out, weights, tuple(atoms), low, high)


def convolution_power(m: GridMeasure, n: int, out_grid: Grid | None = None) -> GridMeasure:
    if n < 0:
        raise ValueError("n must be non-negative")
    grid = m.grid if out_grid is None else out_grid
    result = point_mass(grid)
    for _ in range(n):
        result = convolve(result, m, grid)
    return result


def convolution_powers(m: GridMeasure, n_max: int, out_grid: Grid | None = None) -> list[GridMeasure]:
    """``[m^{*0}, m^{*1}, ..., m^{*n_max}]``, each obtained from the previous by one convolution."""
    grid = m.grid if out_grid is None else out_grid
    out = [point_mass(grid, 0.0, 1.0)]
    for _ in range(n_max):
        out.append(convolve(out[-1], m, grid))
    return out


@dataclass(frozen=True)
class NeumannSum:
    measure: GridMeasure
    rho: float
    n_terms: int
    truncation_bound: float


def neumann_sum(kernel: GridMeasure, n_terms: int) -> NeumannSum:
    """``(1 - rho) * sum_{k<=n} kernel^{*k}``, a probability measure up to truncation."""
    rho = kernel.mass
    if not rho < 1.0:
        raise ValueError(f"kernel mass rho={rho} must be < 1")
    powers = convolution_powers(kernel, n_terms)
    w = np.zeros(kernel.grid.n)
    atoms: list[tuple[float, float]] = []
    lo = hi = 0.0
    for p in powers:
        w += p.weights
        atoms.extend(p.atoms)
        lo += p.lost_low
        hi += p.lost_high
    c = 1.0 - rho
    meas = GridMeasure(kernel.grid, c * w, tuple((l, c * m) for l, m in atoms), c * lo, c * hi)
    return NeumannSum(meas, rho, n_terms, rho ** (n_terms + 1) / (1.0 - rho))


# ---------------------------------------------------------------- renewal problems


@dataclass(frozen=True)
class RenewalProblem:
    """``u = h + u * G`` on the cell centres of ``domain``.

    ``outside`` gives the constant values of ``u`` assumed below and above the
    domain; their contribution is folded into the forcing term.
    """

    domain: Grid
    h: np.ndarray
    kernel: GridMeasure
    label: str = ""
    outside: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        if h.shape != (self.domain.n - 1,):
            raise ValueError("h must hold one value per domain cell")
        if not np.all(np.isfinite(h)):
            raise ValueError("forcing term must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        _check_lattice(GridMeasure(self.domain, np.zeros(self.domain.n)), self.kernel)
        if not self.rho < 1.0:
            raise ValueError(f"kernel mass rho={self.rho} must be < 1")

    @classmethod
    def from_function(cls, domain: Grid, h_fn: Callable[[np.ndarray], np.ndarray],
                      kernel: GridMeasure, label: str = "",
                      outside: tuple[float, float] = (0.0, 0.0)) -> "RenewalProblem":
        return cls(domain, np.asarray(h_fn(domain.centers), dtype=float), kernel, label, outside)

    @property
    def rho(self) -> float:
        return self.kernel.mass

    @property
    def x(self) -> np.ndarray:
        return self.domain.centers

    @property
    def size(self) -> int:
        return self.domain.n - 1

    @property
    def reach_lost(self) -> float:
        """Kernel mass that falls outside the kernel grid yet within reach of the domain."""
        span = self.domain.x_max - self.domain.x_min
        g = self.kernel.grid
        lost = 0.0
        if g.x_max < span - 1e-9:
            lost += self.kernel.lost_high
        if g.x_min > -span + 1e-9:
            lost += self.kernel.lost_low
        return lost

    def operator(self) -> "ConvolutionOperator":
        return ConvolutionOperator(self.kernel.dense(), self.kernel.grid.origin, self.size)

    def effective_h(self) -> np.ndarray:
        lo, hi = self.outside
        h = self.h.copy()
        if lo == 0.0 and hi == 0.0:
            return h
        g = self.kernel.dense()
        n = self.size
        i = np.arange(n)
        # u_{i-k} is below the domain when k > i, above when k <= i - n
        csum = np.concatenate([[0.0], np.cumsum(g)])

        def mass_k_greater(t):  # kernel weight on lattice indices > t
            j = np.clip(t - self.kernel.grid.origin + 1, 0, g.size)
            return csum[-1] - csum[j]

        def mass_k_at_most(t):
            j = np.clip(t - self.kernel.grid.origin + 1, 0, g.size)
            return csum[j]
        below = mass_k_greater(i) + self.kernel.lost_high
        above = mass_k_at_most(i - n) + self.kernel.lost_low
        return h + lo * below + hi * above


@dataclass
class ConvolutionOperator:
    """``(T u)_i = sum_j g_j u_{i - origin - j}`` with ``u = 0`` outside ``0..n-1``."""

    g: np.ndarray
    origin: int
    n: int

    def __call__(self, u: np.ndarray) -> np.ndarray:
        full = np.convolve(u, self.g)
        idx = np.arange(self.n) - self.origin
        ok = (idx >= 0) & (idx < full.size)
        out = np.zeros(self.n)
        out[ok] = full[idx[ok]]
        return out


@dataclass(frozen=True)
class RenewalSolution:
    x: np.ndarray
    u: np.ndarray
    h: np.ndarray
    residual: float
    residual_by_point: np.ndarray
    iterations: int
    method: str
    rho: float
    tol: float
    trace: tuple[float, ...] = ()
    lost_mass: float = 0.0
    truncation_bound: float = 0.0
    label: str = ""

    @property
    def valid(self) -> bool:
        return self.lost_mass <= 1e-6 * self.rho

    def at(self, x):
        """Linear interpolation (and extrapolation at the ends) of the cell-centre values."""
        x = np.asarray(x, dtype=float)
        xs, us = self.x, self.u
        out = np.interp(x, xs, us)
        lo = x < xs[0]
        hi = x > xs[-1]
        if np.any(lo):
            s = (us[1] - us[0]) / (xs[1] - xs[0])
            out = np.where(lo, us[0] + s * (x - xs[0]), out)
        if np.any(hi):
            s = (us[-1] - us[-2]) / (xs[-1] - xs[-2])
            out = np.where(hi, us[-1] + s * (x - xs[-1]), out)
        return out if out.ndim else float(out)

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        buf.write("# potentia-csv v1\n")
        meta = {"method": self.method, "rho": self.rho, "tol": self.tol,
                "iterations": self.iterations, "residual": self.residual,
                "lost_mass": self.lost_mass, "label": self.label}
        if header:
            meta.update(header)
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        buf.write("x,u,h,residual_contribution\n")
        for x, u, h, r in zip(self.x, self.u, self.h, self.residual_by_point):
            buf.write(f"{x:.10g},{u:.17g},{h:.17g},{r:.6e}\n")
        return buf.getvalue()


def iteration_cap(rho: float, tol: float, sup_h: float) -> int:
    if sup_h <= 0:
        return 50
    return int(math.ceil(math.log(tol * (1.0 - rho) / sup_h) / math.log(rho))) + 50 if rho > 0 else 50


def solve_fixed_point(p: RenewalProblem, tol: float = 1e-10, max_iter: int | None = None) -> RenewalSolution:
    """Picard iteration ``u <- h + T u`` from ``u = h``; stops when the update is below ``tol``."""
    T = p.operator()
    h = p.effective_h()
    sup_h = float(np.max(np.abs(h))) if h.size else 0.0
    cap = max_iter if max_iter is not None else iteration_cap(p.rho, tol, sup_h)
    u = h.copy()
    trace: list[float] = []
    it = 0
    while True:
        new = h + T(u)
        r = float(np.max(np.abs(new - u))) if u.size else 0.0
        u = new
        it += 1
        trace.append(r)
        if r <= tol * (1.0 - p.rho):
            break
        if it >= cap:
            raise RenewalConvergenceError(f"fixed-point iteration did not converge in {cap} steps", trace)
    res_pt = np.abs(u - h - T(u))
    return RenewalSolution(p.x, u, p.h, float(res_pt.max(initial=0.0)), res_pt, it, "fixed_point",
                           p.rho, tol, tuple(trace), p.reach_lost, 0.0, p.label)


def pk_terms_for(rho: float, tol: float, sup_h: float) -> int:
    """Smallest ``n`` with geometric truncation bound ``rho^(n+1) sup h / (1 - rho) <= tol``."""
    if sup_h <= 0 or rho <= 0:
        return 0
    return max(0, int(math.ceil(math.log(tol * (1.0 - rho) / sup_h) / math.log(rho) - 1.0)))


def solve_pk_series(p: RenewalProblem, n_terms: int | None = None, tol: float = 1e-10) -> RenewalSolution:
    """Truncated series ``u = sum_k h * G^{*k}``.

    For one-sided kernels (support in ``[0, inf)``) with ``u = 0`` below the
    domain the renewal measure ``sum_k G^{*k}`` is built first by convolution
    powers and applied to ``h`` once.  For two-sided kernels the domain
    boundary interacts with every term, so the series is summed term by term
    through the domain-restricted operator.
    """
    h = p.effective_h()
    sup_h = float(np.max(np.abs(h))) if h.size else 0.0
    n = pk_terms_for(p.rho, tol, sup_h) if n_terms is None else int(n_terms)
    bound = p.rho ** (n + 1) * sup_h / (1.0 - p.rho)
    one_sided = p.kernel.grid.x_min >= 0 and p.outside[0] == 0.0
    T = p.operator()
    if one_sided and n > 0:
        span = p.domain.x_max - p.domain.x_min
        rgrid = Grid(p.domain.step, span + p.domain.step, 0.0)
        g_on = GridMeasure(rgrid, _regrid(p.kernel.dense(), p.kernel.grid, rgrid))
        acc = np.zeros(rgrid.n)
        term = point_mass(rgrid)
        acc += term.dense()
        for _ in range(n):
            term = convolve(term, g_on, rgrid)
            acc += term.weights
        R = ConvolutionOperator(acc, 0, p.size)
        u = R(h)
        method = "pk_series"
    else:
        u = h.copy()
        term = h.copy()
        for _ in range(n):
            term = T(term)
            u = u + term
        method = "pk_series_operator"
    res_pt = np.abs(u - h - T(u))
    return RenewalSolution(p.x, u, p.h, float(res_pt.max(initial=0.0)), res_pt, n, method,
                           p.rho, tol, (), p.reach_lost, bound, p.label)


def _regrid(w: np.ndarray, src: Grid, dst: Grid) -> np.ndarray:
    out = np.zeros(dst.n)
    idx = src.origin + np.arange(w.size) - dst.origin
    ok = (idx >= 0) & (idx < dst.n)
    out[idx[ok]] = w[ok]
    return out


# ---------------------------------------------------------------- Kesten bound


@dataclass(frozen=True)
class KestenReport:
    eps: float
    n_max: int
    constants: tuple[float, ...]
    C: float
    sup_ratio_n1: float
    violation: bool
    light_tail: bool
    note: str


def kesten_check(kernel: GridMeasure, n_max: int = 5, eps: float = 0.2,
                 probes: Sequence[float] | None = None,
                 reference: Callable[[np.ndarray], np.ndarray] | None = None) -> KestenReport:
    """Smallest ``C_n`` with ``tail(G^{*n}) <= C_n n (1+eps)^n tail_ref`` over the probe points.

    A violation means some ``C_n`` with ``n >= 2`` exceeds ``C_1``, i.e. the
    bound fixed by the first power does not carry over geometrically.  A
    doubling ratio ``tail(G*G)/tail(G)`` above 3 at the top probe marks a light
    tail, for which the bound is not applicable.
    """
    m = kernel.mass
    if abs(m - 1.0) > 1e-6:
        raise ValueError(f"kesten_check expects a normalized kernel (mass {m})")
    g = kernel.grid
    if probes is None:
        probes = np.linspace(g.x_min + 0.5 * (g.x_max - g.x_min), g.x_max, 21)
    probes = np.asarray(probes, dtype=float)
    ref = reference(probes) if reference is not None else kernel.tail(probes)
    ref = np.asarray(ref, dtype=float)
    powers = convolution_powers(kernel, n_max)
    consts = []
    ratios = {}
    for n in range(1, n_max + 1):
        r = np.asarray(powers[n].tail(probes)) / ref
        ratios[n] = r
        consts.append(float(np.max(r) / (n * (1.0 + eps) ** n)))
    light = bool(n_max >= 2 and ratios[2][-1] > 3.0)
    violation = bool(max(consts[1:], default=0.0) > consts[0]) and not light
    note = "light-tail: bound not applicable" if light else ("violation" if violation else "ok")
    return KestenReport(eps, n_max, tuple(consts), float(max(consts)), float(np.max(ratios[1])),
                        violation, light, note)


# ---------------------------------------------------------------- state-dependent oracle


def iterate_state_dependent(points: np.ndarray, h: np.ndarray,
                            kernel_row: Callable[[float], np.ndarray], n_iter: int) -> np.ndarray:
    """Brute-force ``u = sum_{k<n} K^k h`` with ``K[i, j] = G(x_i, x_i - x_j)`` on a coarse grid.

    ``kernel_row(x_i)`` returns the mass the kernel at ``x_i`` sends to each
    point.  Intended as an oracle for small grids only.
    """
    K = np.stack([np.asarray(kernel_row(float(x)), dtype=float) for x in points])
    u = np.asarray(h, dtype=float).copy()
    term = u.copy()
    for _ in range(n_iter):
        term = K @ term
        u = u + term
    return u
