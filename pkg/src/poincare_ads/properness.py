"""Quantitative proper discontinuity from an enumerated orbit.

All estimates are empirical, computed from an :class:`OrbitTable` of finite
depth, and every count carries a completeness flag.  Completeness guards rest
on a *linear floor*: the fitted line ``a * |w| - b`` under the displacement
``|mu1(w) - mu2(w)|``.  That displacement bounds nu from below at every
point: nu(gamma . x) >= |mu1 - mu2|(gamma) - nu(x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lie_core as lc
from .errors import EmptyTable, InsufficientDepth
from .groups import OrbitTable, shell_index

DEFAULT_FLOOR = 2.0
DEFAULT_MARGIN = 0.05
ZERO_NU = 1e-9


def convert_sharpness(c_prime: float, C_prime: float) -> tuple[float, float]:
    """(c', C') of mu(rho) <= c' mu(j) + C' to (c, C) in a-coordinates."""
    c = (1.0 - c_prime) / math.sqrt(2.0 * (1.0 + c_prime**2))
    return c, C_prime / math.sqrt(2.0)


@dataclass(frozen=True)
class SharpnessEstimate:
    c_prime: float
    C_prime: float
    c: float
    C: float
    depth: int
    admissible: bool
    floor: float
    margin: float
    n_fit: int


def _ratio_rows(table: OrbitTable, floor: float) -> np.ndarray:
    if len(table) <= 1 or not np.any(table.lengths > 0):
        raise EmptyTable("table has no nontrivial words")
    return table.mu1 > floor


def sharpness_fit(table: OrbitTable, floor: float = DEFAULT_FLOOR,
                  margin: float = DEFAULT_MARGIN) -> SharpnessEstimate:
    """Fit mu2(rho(w)) <= c' mu2(j(w)) + C' over the enumerated words.

    c' is the largest ratio over words with mu2(j(w)) > floor; C' then makes
    the line dominate every word.
    """
    sel = _ratio_rows(table, floor)
    c_prime = float(np.max(table.mu2[sel] / table.mu1[sel])) if np.any(sel) else 0.0
    C_prime = float(np.max(np.maximum(table.mu2 - c_prime * table.mu1, 0.0)))
    c, C = convert_sharpness(c_prime, C_prime)
    return SharpnessEstimate(c_prime, C_prime, c, C, table.depth,
                             c_prime < 1.0 - margin, floor, margin, int(np.sum(sel)))


def clip_lower_bound(table: OrbitTable, floor: float = DEFAULT_FLOOR) -> float:
    """One-sided estimate: max mu2(rho(w)) / mu2(j(w)) over long words.

    This never exceeds C_Lip(j, rho) up to conjugation of rho; it is a lower
    bound and is reported as such.
    """
    sel = _ratio_rows(table, floor)
    if not np.any(sel):
        return 0.0
    return float(np.max(table.mu2[sel] / table.mu1[sel]))


# ---------------------------------------------------------------------------
# Linear floor and completeness


@dataclass(frozen=True)
class LinearFloor:
    a: float
    b: float

    def at(self, length) -> float:
        return self.a * length - self.b


def displacement(table: OrbitTable) -> np.ndarray:
    return np.abs(table.mu1 - table.mu2)


def linear_floor(table: OrbitTable) -> LinearFloor:
    """Line a*n - b below min{|mu1 - mu2|(w) : |w| = n} for every enumerated n.

    The slope is the least-squares slope of the per-length minima, the
    intercept the smallest b keeping the line underneath all of them.
    """
    lengths = np.unique(table.lengths[table.lengths > 0])
    if lengths.size == 0:
        return LinearFloor(math.inf, 0.0)
    d = displacement(table)
    mins = np.array([np.min(d[table.lengths == n]) for n in lengths])
    if lengths.size == 1:
        a = float(mins[0] / lengths[0])
    else:
        a = float(np.polyfit(lengths.astype(float), mins, 1)[0])
    b = float(max(np.max(a * lengths - mins), 0.0))
    return LinearFloor(a, b)


def unenumerated_nu_floor(table: OrbitTable, floor: LinearFloor | None = None,
                          x=None, depth: int | None = None) -> float:
    """Lower bound on nu(gamma . x) for every word longer than ``depth``
    (default: the table depth).  +inf for a trivial group; may be <= 0, in
    which case nothing is certified."""
    if table.gens.rank == 0:
        return math.inf
    floor = linear_floor(table) if floor is None else floor
    if not math.isfinite(floor.a):
        return math.inf
    depth = table.depth if depth is None else depth
    slack = 0.0 if x is None else float(lc.nu_point(np.asarray(x, dtype=float)))
    return floor.at(depth + 1) - slack


def count_pseudoball(table: OrbitTable, x, R: float,
                     floor: LinearFloor | None = None) -> tuple[int, bool]:
    """#{gamma : nu(gamma . x) < R} over the table, and whether no longer
    word can enter the pseudo-ball."""
    if not R > 0:
        raise ValueError("R must be positive")
    x = lc.basepoint(2) if x is None else lc.check_quadric(np.asarray(x, dtype=float))
    count = int(np.sum(table.nu_at(x) < R))
    complete = unenumerated_nu_floor(table, floor, x) > R
    return count, bool(complete)


# ---------------------------------------------------------------------------
# Critical exponent


@dataclass(frozen=True)
class CriticalExponent:
    delta_hat: float
    window: tuple[float, float]
    residual: float


def critical_exponent(table: OrbitTable, lower: float = 0.2, upper: float = 0.9,
                      n_grid: int = 64) -> CriticalExponent:
    """Slope of log #{gamma : ||mu(gamma)||_a < R} against R.

    R ranges over [lower, upper] times the radius up to which the ball is
    believed complete (the smallest ||mu||_a among words of maximal length).
    """
    if table.gens.rank == 0:
        return CriticalExponent(0.0, (0.0, 0.0), 0.0)
    if table.depth < 6:
        raise InsufficientDepth(f"critical exponent needs depth >= 6, got {table.depth}")
    norms = np.sort(lc.mu_norm_a(table.mu1, table.mu2))
    r_max = float(np.min(lc.mu_norm_a(table.mu1, table.mu2)[table.lengths == table.depth]))
    grid = np.linspace(lower * r_max, upper * r_max, n_grid)
    counts = np.searchsorted(norms, grid, side="left")
    y = np.log(np.maximum(counts, 1))
    slope, icpt = np.polyfit(grid, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * grid + icpt)) ** 2)))
    return CriticalExponent(max(float(slope), 0.0), (float(grid[0]), float(grid[-1])), resid)


def count_growth_slope(table: OrbitTable, lower: float = 0.2, upper: float = 0.9,
                       n_grid: int = 64) -> float:
    """Slope of log count_pseudoball(x0, R) against R over the complete range."""
    if table.gens.rank == 0:
        return 0.0
    r_max = unenumerated_nu_floor(table)
    grid = np.linspace(lower * r_max, upper * r_max, n_grid)
    nus = np.sort(table.nu_at(lc.basepoint(2)))
    counts = np.searchsorted(nus, grid, side="left")
    return float(np.polyfit(grid, np.log(np.maximum(counts, 1)), 1)[0])


# ---------------------------------------------------------------------------
# Shell growth


@dataclass(frozen=True)
class GrowthFit:
    """Envelope shellcount(n) <= S * exp(U * n) for nu-shells of width r.

    ``shell_counts`` are exact counts of enumerated words per shell;
    ``n_complete`` shells (indices 0 .. n_complete - 1) are known to contain
    every group element, and the envelope is fitted on those.  ``nu_floor``
    bounds nu(gamma . x) from below for every unenumerated word.
    """

    r: float
    S: float
    U: float
    r_min: float | None
    floor: LinearFloor
    shell_counts: tuple[int, ...]
    n_complete: int
    nu_floor: float
    depth: int
    x: tuple[float, ...] = field(default=(1.0, 0.0, 0.0, 0.0))

    def envelope(self, n) -> np.ndarray:
        return self.S * np.exp(self.U * np.asarray(n, dtype=float))

    @property
    def first_unenumerated_shell(self) -> int:
        if not math.isfinite(self.nu_floor):
            return -1
        return max(int(math.floor(self.nu_floor / self.r)), 0)


def fit_envelope(counts: np.ndarray) -> tuple[float, float]:
    """(S, U) with S anchored on the first two shells and U the least
    growth rate that then dominates every later shell."""
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0:
        return 1.0, 0.0
    S = max(1.0, float(np.max(counts[:2])))
    U = 0.0
    for n in range(2, counts.size):
        if counts[n] > S:
            U = max(U, math.log(counts[n] / S) / n)
    # roundoff guard: the envelope must dominate exactly
    while np.any(counts > S * np.exp(U * np.arange(counts.size))):
        U = math.nextafter(U, math.inf) if U > 0 else 1e-15
    return S, U


def growth_fit(table: OrbitTable, x=None, r: float | None = None) -> GrowthFit:
    """Shell counts of nu(gamma . x), their exponential envelope, r_min and
    the linear floor."""
    x = lc.basepoint(2) if x is None else lc.check_quadric(np.asarray(x, dtype=float))
    floor = linear_floor(table)
    nu = table.nu_at(x)
    if r is None:
        r = default_shell_width(table, floor)
    if not r > 0:
        raise ValueError("shell width must be positive")
    nu_floor = unenumerated_nu_floor(table, floor, x)
    shells = shell_index(nu, r)
    counts = np.bincount(shells)
    if math.isfinite(nu_floor):
        n_complete = max(int(math.floor(nu_floor / r)), 0)
    else:
        n_complete = counts.size
    n_complete = min(n_complete, counts.size)
    S, U = fit_envelope(counts[:n_complete] if n_complete > 0 else counts[:1])
    nonzero = nu[nu > ZERO_NU]
    r_min = float(np.min(nonzero)) if nonzero.size else None
    return GrowthFit(float(r), S, U, r_min, floor, tuple(int(c) for c in counts),
                     n_complete, float(nu_floor), table.depth, tuple(float(v) for v in x))


def default_shell_width(table: OrbitTable, floor: LinearFloor | None = None) -> float:
    """One shell per word letter: the floor slope when it is usable."""
    floor = linear_floor(table) if floor is None else floor
    if math.isfinite(floor.a) and floor.a > 0.05:
        return float(floor.a)
    nonzero = table.nu[table.nu > ZERO_NU]
    return float(np.min(nonzero)) if nonzero.size else 1.0


# ---------------------------------------------------------------------------
# Dirichlet domain


def dirichlet_member(x, table: OrbitTable, tol: float = 1e-12) -> bool:
    """nu(x) <= nu(gamma . x) for every enumerated gamma != e."""
    x = lc.check_quadric(np.asarray(x, dtype=float))
    nus = table.nu_at(x)
    others = ~table.identity_rows
    return bool(np.all(float(lc.nu_point(x)) <= nus[others] + tol))
