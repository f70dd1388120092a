r"""Generalized Poincare series of psi_ell^{+-} over an enumerated orbit.

    phi(x) = sum_{gamma in Gamma} psi(gamma^{-1} . x)

Truncated sums run over an :class:`OrbitTable` in its (length, lex) order and
are accumulated with ``math.fsum`` on real and imaginary parts, so the result
is correctly rounded and independent of summation order.  Terms are carried
in log form and rescaled by the largest term before exponentiation.

Omitted mass is bounded through the shell envelope of a :class:`GrowthFit`:
every element in nu-shell n obeys |psi| <= cosh(n r / 4)^{-ell}, there are
at most S e^{U n} of them, and cosh t >= e^t / 2 gives the geometric tail

    S 2^ell e^{(U - ell r / 4) n0} / (1 - e^{U - ell r / 4}).

Every certificate is conditional on that envelope and on the linear floor.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lie_core as lc
from . import properness as pr
from .errors import DivergentAtDepth, NearFixer, PoleProximity, TailTooLarge
from .groups import OrbitTable, conjugate, enumerate_words, fmt
from .lie_core import GroupElement
from .spectra import LaplacianConfig, SpectralIndex, eigenvalue_ads, laplacian_fd

FIXER_TOL = 1e-9
TAIL_PRECONDITION = 1e-8
SHIFT_MU_MAX = 0.5


# ---------------------------------------------------------------------------
# Terms


def _terms(idx: SpectralIndex, pts: np.ndarray):
    """(log|psi|, arg psi, sign) per point, with psi = sign * e^{log + i arg}.

    Points with x1 < 0 are reflected through the origin first and the factor
    (-1)^ell goes into ``sign``; then psi(-x) = (-1)^ell psi(x) holds bit for
    bit and antipodal pairs cancel exactly.
    """
    x1, x2 = pts[..., 0], pts[..., 1]
    flip = (x1 < 0) | ((x1 == 0) & (x2 < 0))
    y1, y2 = np.where(flip, -x1, x1), np.where(flip, -x2, x2)
    r2 = y1 * y1 + y2 * y2
    if np.any(r2 < 1e-30):
        raise PoleProximity("a translated point lies on the pole set of psi")
    log_mag = -0.5 * idx.ell * np.log(r2)
    phase = -idx.ell * np.arctan2(idx.sign * y2, y1)
    sign = np.where(flip & (idx.ell % 2 == 1), -1.0, 1.0)
    return log_mag, phase, sign


def _fsum_complex(log_mag, phase, sign, log_scale: float) -> complex:
    w = sign * np.exp(log_mag - log_scale)
    return complex(math.fsum(w * np.cos(phase)), math.fsum(w * np.sin(phase)))


# ---------------------------------------------------------------------------
# Tails


def tail_bound(ell: int, fit, n0: int | None = None) -> float:
    """log of sum_{n >= n0} S e^{U n} cosh(r n / 4)^{-ell}, bounded geometrically.

    ``fit`` needs attributes S, U, r.  Returns +inf when U >= ell r / 4 and
    -inf when nothing is omitted (n0 < 0, e.g. finite groups).
    """
    if n0 is None:
        n0 = fit.first_unenumerated_shell
    if n0 < 0:
        return -math.inf
    rate = fit.U - ell * fit.r / 4.0
    if rate >= 0:
        return math.inf
    return (math.log(fit.S) + ell * math.log(2.0) + rate * n0
            - math.log(-math.expm1(rate)))


def omitted_shell(fit: pr.GrowthFit, table: OrbitTable, x=None, depth: int | None = None) -> int:
    """First shell that may hold a word longer than ``depth`` (acting on x)."""
    nu_floor = pr.unenumerated_nu_floor(table, fit.floor, x, depth)
    if not math.isfinite(nu_floor):
        return -1
    return max(int(math.floor(nu_floor / fit.r)), 0)


def tail_at(ell: int, table: OrbitTable, x=None, fit: pr.GrowthFit | None = None,
            depth: int | None = None) -> float:
    """Log tail bound for the series truncated at ``depth`` and evaluated at x.

    The set of omitted words is closed under inversion, so the bound on
    sum |psi(gamma . x)| over omitted gamma also bounds the series terms.
    """
    if fit is None:
        fit = pr.growth_fit(table, x)
    return tail_bound(ell, fit, omitted_shell(fit, table, x, depth))


def ell_threshold_closed(S: float, U: float, T: float) -> int:
    """Smallest integer d > (log(2S) + U) / log cosh T."""
    if S < 1 or U < 0 or not T > 0:
        raise ValueError("need S >= 1, U >= 0, T > 0")
    R = (math.log(2.0 * S) + U) / math.log(math.cosh(T))
    return int(math.floor(R)) + 1


def threshold_sum(S: float, U: float, T: float, d: int, n_max: int = 10_000) -> float:
    """S * sum_{n >= 1} cosh(T n)^{-d} e^{U n}, which is < 1 once d passes
    :func:`ell_threshold_closed`.  Terms are formed in log scale."""
    n = np.arange(1, n_max + 1, dtype=float)
    t = T * n
    logcosh = t + np.log1p(np.exp(-2.0 * t)) - math.log(2.0)
    return S * math.fsum(np.exp(U * n - d * logcosh))


def closed_threshold_for_fit(fit: pr.GrowthFit) -> int:
    """The closed-form threshold with cosh(T n) matched to the shell bound
    cosh(r n / 4)."""
    return ell_threshold_closed(fit.S, fit.U, fit.r / 4.0)


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class SeriesValue:
    """value = scaled * exp(log_scale)."""

    scaled: complex
    log_scale: float
    terms_used: int
    max_term_log: float
    tail_log_bound: float

    @property
    def value(self) -> complex:
        return self.scaled * math.exp(self.log_scale)

    @property
    def tail(self) -> float:
        return math.exp(self.tail_log_bound)


def _check_index(idx: SpectralIndex) -> None:
    if idx.m != 2:
        raise ValueError("Poincare series are implemented on AdS^3 (m = 2) only")
    if idx.ell < 2:
        raise ValueError("ell must be >= 2")


def poincare_eval(idx: SpectralIndex, table: OrbitTable, x=None,
                  fit: pr.GrowthFit | None = None) -> SeriesValue:
    """sum over the table of psi(gamma^{-1} . x) with its tail bound."""
    _check_index(idx)
    x = table.basepoint if x is None else lc.check_quadric(np.asarray(x, dtype=float))
    tail = tail_at(idx.ell, table, x, fit)
    if tail == math.inf:
        raise DivergentAtDepth(
            f"ell = {idx.ell} is below the geometric floor of the growth envelope")
    log_mag, phase, sign = _terms(idx, table.inverse_points(x))
    top = float(np.max(log_mag))
    scaled = _fsum_complex(log_mag, phase, sign, top)
    return SeriesValue(scaled, top, len(table), top, tail)


def truncated_values(idx: SpectralIndex, table: OrbitTable, pts, chunk: int = 1 << 20) -> np.ndarray:
    """Truncated series at many points (shape (K, 4)) as complex doubles.

    Plain pairwise summation; used under finite-difference stencils where
    a common table and a fixed reduction order keep the values consistent.
    """
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 4)
    ginv1 = lc.sl2_inv(table.g1)
    out = np.empty(flat.shape[0], dtype=complex)
    step = max(1, chunk // max(len(table), 1))
    for s in range(0, flat.shape[0], step):
        m = lc.quadric_to_matrix(flat[s:s + step])
        q = lc.matrix_to_quadric(ginv1[None] @ m[:, None] @ table.g2[None])
        log_mag, phase, sign = _terms(idx, q)
        out[s:s + step] = np.sum(sign * np.exp(log_mag + 1j * phase), axis=1)
    return out.reshape(pts.shape[:-1])


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class NonvanishingCertificate:
    ell: int
    identity_mass: int
    remainder: float
    tail: float
    parity_excluded: bool
    complete: bool
    depth: int
    caveats: tuple[str, ...] = ()

    @property
    def margin(self) -> float:
        return self.identity_mass - self.remainder - self.tail

    @property
    def verdict(self) -> bool:
        return (not self.parity_excluded) and self.margin > 0


@dataclass(frozen=True)
class OrbitAtOrigin:
    """Orbit data at x0 shared by certificates for every ell."""

    log_r2: np.ndarray
    n_plus: int
    n_minus: int


def orbit_at_origin(table: OrbitTable) -> OrbitAtOrigin:
    if not table.is_x0:
        raise ValueError("certificates are computed at the basepoint x0")
    pts = table.points()
    fixers = table.nu < FIXER_TOL
    x0 = lc.basepoint(2)
    at_plus = np.max(np.abs(pts - x0), axis=-1) < FIXER_TOL
    at_minus = np.max(np.abs(pts + x0), axis=-1) < FIXER_TOL
    odd = fixers & ~(at_plus | at_minus)
    if np.any(odd):
        i = int(np.flatnonzero(odd)[0])
        raise NearFixer(f"element {table.label(i)} maps x0 into the compact orbit but not to +-x0")
    rest = pts[~fixers]
    log_r2 = np.log(rest[:, 0] ** 2 + rest[:, 1] ** 2)
    return OrbitAtOrigin(log_r2, int(np.sum(at_plus)), int(np.sum(at_minus)))


def certify_nonzero(idx: SpectralIndex, table: OrbitTable,
                    fit: pr.GrowthFit | None = None,
                    orbit: OrbitAtOrigin | None = None) -> NonvanishingCertificate:
    """Certificate that the series does not vanish at x0.

    Elements fixing x0 contribute psi(x0) = 1 each; the antipode contributes
    (-1)^ell, so for odd ell the series vanishes and the row is excluded.
    The remainder sums the exact |psi(gamma . x0)| = (x1^2 + x2^2)^{-ell/2}
    over every other enumerated element.
    """
    _check_index(idx)
    fit = pr.growth_fit(table) if fit is None else fit
    orbit = orbit_at_origin(table) if orbit is None else orbit
    parity = orbit.n_minus > 0 and idx.ell % 2 == 1
    identity_mass = orbit.n_plus + (orbit.n_minus if idx.ell % 2 == 0 else 0)
    remainder = math.fsum(np.exp(-0.5 * idx.ell * orbit.log_r2))
    tail_log = tail_bound(idx.ell, fit)
    tail = math.exp(tail_log) if tail_log < 700 else math.inf
    complete = (not math.isfinite(fit.nu_floor)) or fit.n_complete >= 1
    caveats = ["conditional on the fitted envelope and linear floor"]
    if not complete:
        caveats.append("linear floor does not certify coverage of any shell")
    return NonvanishingCertificate(idx.ell, identity_mass, float(remainder), float(tail),
                                   parity, bool(complete), table.depth, tuple(caveats))


@dataclass(frozen=True)
class SpectrumRow:
    ell: int
    eigenvalue: int
    certificate: NonvanishingCertificate

    @property
    def certified(self) -> bool:
        return self.certificate.verdict

    @property
    def parity_excluded(self) -> bool:
        return self.certificate.parity_excluded

    @property
    def verdict_label(self) -> str:
        if self.parity_excluded:
            return "parity_excluded"
        return "certified" if self.certified else "not_certified"


SPECTRUM_FIELDS = ("ell", "eigenvalue", "identity_mass", "remainder", "tail", "verdict",
                   "complete_flags", "depth")


@dataclass(frozen=True)
class SpectrumReport:
    rows: tuple[SpectrumRow, ...]
    ell0: int | None
    clip_lower: float
    trend: float
    antipodal: bool
    depth: int
    closed_threshold: int | None = None
    caveats: tuple[str, ...] = field(default_factory=tuple)

    @property
    def certified_ells(self) -> list[int]:
        return [r.ell for r in self.rows if r.certified]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SPECTRUM_FIELDS)
        for r in self.rows:
            c = r.certificate
            w.writerow([r.ell, r.eigenvalue, c.identity_mass, fmt(c.remainder), fmt(c.tail),
                        r.verdict_label, "complete" if c.complete else "incomplete", c.depth])
        return buf.getvalue()


def spectrum_certified(table: OrbitTable, fit: pr.GrowthFit | None = None, m: int = 2,
                       ell_max: int = 20, ell_min: int = 2, sign: int = 1) -> SpectrumReport:
    """Certificates for ell_min <= ell <= ell_max.

    ell0 is the least ell such that every ell' in [ell, ell_max] not excluded
    by parity is certified (None if ell_max itself fails).
    """
    if ell_max < 2 or ell_min < 2 or ell_min > ell_max:
        raise ValueError("need 2 <= ell_min <= ell_max")
    fit = pr.growth_fit(table) if fit is None else fit
    orbit = orbit_at_origin(table)
    rows = []
    for ell in range(ell_min, ell_max + 1):
        cert = certify_nonzero(SpectralIndex(ell, sign, m), table, fit, orbit)
        rows.append(SpectrumRow(ell, eigenvalue_ads(m, ell), cert))
    ell0 = None
    for r in reversed(rows):
        if r.parity_excluded:
            continue
        if not r.certified:
            break
        ell0 = r.ell
    try:
        clip = pr.clip_lower_bound(table)
    except Exception:
        clip = 0.0
    trend = 1.0 / (1.0 - clip) ** 3 if clip < 1 else math.inf
    antipodal = any(r.parity_excluded for r in rows) or bool(np.any(table.antipode))
    try:
        closed = closed_threshold_for_fit(fit)
    except (ValueError, ZeroDivisionError):
        closed = None
    return SpectrumReport(tuple(rows), ell0, clip, trend, antipodal, table.depth, closed,
                          ("conditional on the fitted envelope and linear floor",))


# ---------------------------------------------------------------------------
# Identities


@dataclass(frozen=True)
class InvarianceResult:
    """Largest residual, the tightest allowed bound, and whether every
    sample met its own bound."""

    residual: float
    allowed: float
    ok: bool


def invariance_residual(idx: SpectralIndex, table: OrbitTable, gamma_rows: Sequence[int],
                        xs, slack: float = 1e-12) -> InvarianceResult:
    """max |phi_N(gamma . x) - phi_N(x)| over table rows gamma and points x.

    Both truncations contain every word of length <= N - |gamma| (after
    re-indexing), so each sample is held to 2 * tail(N - |gamma|, x) + slack.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    worst, tightest, ok = 0.0, math.inf, True
    for i in gamma_rows:
        gam = table.element(int(i))
        eff = table.depth - int(table.lengths[i])
        for x in xs:
            b = poincare_eval(idx, table, x).value
            a = poincare_eval(idx, table, lc.act(gam, x)).value
            res = abs(a - b)
            bound = 2.0 * math.exp(tail_at(idx.ell, table, x, depth=eff)) + slack * max(1.0, abs(b))
            worst, tightest = max(worst, res), min(tightest, bound)
            ok = ok and res <= bound
    return InvarianceResult(worst, tightest, ok)


def conjugation_equivariance(idx: SpectralIndex, table: OrbitTable, g: GroupElement, xs) -> float:
    """max |S_Gamma(g . psi)(x) - S_{g^-1 Gamma g}(psi)(g^-1 . x)| over xs.

    (g . psi)(y) = psi(g^{-1} y); both sides are the same finite sum
    term by term.
    """
    _check_index(idx)
    conj = enumerate_words(conjugate(table.gens, g), table.depth)
    gi = g.inverse()
    worst = 0.0
    for x in np.atleast_2d(np.asarray(xs, dtype=float)):
        pts = table.inverse_points(x)
        lhs_pts = lc.act(gi, pts)
        lm, ph, sg = _terms(idx, lhs_pts)
        lhs = _fsum_complex(lm, ph, sg, 0.0)
        rhs_pts = conj.inverse_points(lc.act(gi, x))
        lm, ph, sg = _terms(idx, rhs_pts)
        rhs = _fsum_complex(lm, ph, sg, 0.0)
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass(frozen=True)
class ShiftResult:
    g: GroupElement
    r_min: float
    r_min_identity: float
    positive: bool
    trials: int


def _central(table: OrbitTable) -> np.ndarray:
    return table.lengths == 0


def shifted_r_min(table: OrbitTable, g: GroupElement) -> float:
    """min over non-central enumerated gamma of nu(g^-1 gamma g . x0)."""
    keep = ~_central(table)
    if not np.any(keep):
        return math.inf
    h1, h2 = g.g1, g.g2
    a = lc.sl2_inv(h1) @ table.g1[keep] @ h1
    b = lc.sl2_inv(h2) @ table.g2[keep] @ h2
    return float(np.min(lc.mu2(a @ lc.sl2_inv(b))))


def origin_shift_search(table: OrbitTable, trials: int = 64,
                        rng: np.random.Generator | None = None,
                        tol: float = FIXER_TOL) -> ShiftResult:
    """Search g with ||mu(g)|| small so that no g^-1 gamma g moves x0 into
    the compact orbit.  The identity is tried first and kept when it
    already works."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    e = GroupElement.identity()
    base = shifted_r_min(table, e)
    best, best_r = e, base
    if base > tol:
        return ShiftResult(e, base, base, True, 1)
    for _ in range(trials - 1):
        g = GroupElement(lc.random_sl2(rng, mu_max=SHIFT_MU_MAX),
                         lc.random_sl2(rng, mu_max=SHIFT_MU_MAX))
        r = shifted_r_min(table, g)
        if r > best_r:
            best, best_r = g, r
    return ShiftResult(best, best_r, base, best_r > tol, trials)


def eigen_residual(idx: SpectralIndex, table: OrbitTable, xs,
                   cfg: LaplacianConfig | None = None, eps: float = 1e-300) -> float:
    """max over xs of |L phi_N - lambda phi_N| / |lambda phi_N| (or
    |L phi_N| / |phi_N| when lambda = 0), for the truncated series phi_N."""
    _check_index(idx)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    for x in xs:
        sv = poincare_eval(idx, table, x)
        if not sv.tail <= TAIL_PRECONDITION * abs(sv.value):
            raise TailTooLarge(
                f"tail {sv.tail:.3g} exceeds {TAIL_PRECONDITION:g} x |phi| = {abs(sv.value):.3g}")

    def f(pts):
        return truncated_values(idx, table, pts)

    lap = laplacian_fd(f, xs, cfg)
    phi = f(xs)
    lam = idx.eigenvalue
    if lam == 0:
        res = np.abs(lap) / (np.abs(phi) + eps)
    else:
        res = np.abs(lap - lam * phi) / (np.abs(lam * phi) + eps)
    return float(np.max(res))
