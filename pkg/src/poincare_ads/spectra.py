r"""Explicit eigenfunctions and finite-difference Laplacians.

On AdS^{m+1} = {Q = 1} the functions

    psi_ell^{+-}(x) = (x1 +- i x2)^{-ell}

are eigenfunctions of the Laplacian with eigenvalue ell (ell - m).  Their
modulus depends only on nu: |psi| = (x1^2 + x2^2)^{-ell/2} = cosh(nu/2)^{-ell}.

On X = SU(2,2)/U(1,2) (an open set of C^4 modulo C^*) the functions

    psi_ell(z) = P_ell(z1, z2) h(z)^{ell+1} (|z1|^2 + |z2|^2)^{-2 ell - 1}

with h(z) = |z1|^2 + |z2|^2 - |z3|^2 - |z4|^2 have eigenvalue 2(ell+1)(ell-2).

The Laplacians are evaluated by finite differences in the ambient space on the
degree-0 extension F(y) = f(y / sqrt(Q(y))).  The overall constant s in
front of the ambient operator is fixed by :func:`calibrate` against a probe
with nonzero eigenvalue.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import CalibrationAmbiguous, PoleProximity
from . import lie_core as lc

POLE_TOL = 1e-30
DEFAULT_H = 1e-3
S_CANDIDATES = (1.0, -1.0, 0.5, -0.5, 2.0, -2.0)
TIE_RATIO = 1.1
CALIBRATION_SAMPLES = 50
CALIBRATION_SEED = 20240611

# finite-difference second-derivative stencils: offsets and weights (times 1/h^2)
STENCILS = {
    "central2": ((-1, 0, 1), (1.0, -2.0, 1.0)),
    "central4": ((-2, -1, 0, 1, 2), tuple(w / 12.0 for w in (-1.0, 16.0, -30.0, 16.0, -1.0))),
}


# ---------------------------------------------------------------------------
# Indices and values


@dataclass(frozen=True)
class SpectralIndex:
    ell: int
    sign: int = 1
    m: int = 2

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 0:
            raise ValueError("ell must be a non-negative integer")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        object.__setattr__(self, "ell", int(self.ell))

    @property
    def lam(self) -> int:
        return 2 * self.ell - self.m

    @property
    def eigenvalue(self) -> int:
        return eigenvalue_ads(self.m, self.ell)


@dataclass(frozen=True)
class LogComplex:
    """log_mag + i phase, i.e. the complex number exp(log_mag) e^{i phase}.

    Fields may be arrays.  Magnitudes far below the double range stay
    representable; convert with :meth:`scaled` after subtracting a common
    log-scale.
    """

    log_mag: np.ndarray | float
    phase: np.ndarray | float

    def scaled(self, log_scale: float = 0.0):
        return np.exp(np.asarray(self.log_mag) - log_scale) * np.exp(1j * np.asarray(self.phase))

    @property
    def value(self):
        return self.scaled(0.0)

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        return LogComplex(np.asarray(self.log_mag) + other.log_mag,
                          wrap_phase(np.asarray(self.phase) + other.phase))


def wrap_phase(p):
    """Map angles into (-pi, pi]."""
    p = np.asarray(p, dtype=float)
    return np.pi - np.mod(np.pi - p, 2 * np.pi)


def eigenvalue_ads(m: int, ell: int) -> int:
    if ell < 0:
        raise ValueError("ell must be >= 0")
    return ell * (ell - m)


def eigenvalue_su22(ell: int) -> int:
    return 2 * (ell + 1) * (ell - 2)


def _rho2(x: np.ndarray) -> np.ndarray:
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    if np.any(r2 < POLE_TOL):
        raise PoleProximity("x1^2 + x2^2 below 1e-30: too close to the pole set of psi")
    return r2


def psi_ads(idx: SpectralIndex, x) -> LogComplex:
    """psi_ell^{sign}(x) in log form; x has shape (..., m + 2)."""
    x = np.asarray(x, dtype=float)
    r2 = _rho2(x)
    log_mag = -0.5 * idx.ell * np.log(r2)
    phase = wrap_phase(-idx.ell * np.arctan2(idx.sign * x[..., 1], x[..., 0]))
    return LogComplex(log_mag, phase)


def psi_ads_value(idx: SpectralIndex, x) -> np.ndarray:
    """psi_ell^{sign}(x) as a complex double (may underflow for huge ell nu)."""
    x = np.asarray(x, dtype=float)
    _rho2(x)
    return (x[..., 0] + 1j * idx.sign * x[..., 1]) ** (-idx.ell)


def psi_ads_abs(ell: int, x) -> np.ndarray:
    """|psi_ell^{+-}(x)| = (x1^2 + x2^2)^{-ell/2}."""
    x = np.asarray(x, dtype=float)
    return _rho2(x) ** (-0.5 * ell)


def decay_bounds(ell: int, nu) -> tuple[np.ndarray, np.ndarray]:
    """Log-scale upper bounds on |psi_ell(x)| in terms of nu = nu(x):

    loose = log (cosh(nu) / 2)^{-ell/2},  tight = log cosh(nu / 4)^{-ell}.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ValueError("nu must be >= 0")
    loose = -0.5 * ell * (_logcosh(nu) - math.log(2.0))
    tight = -ell * _logcosh(nu / 4.0)
    return loose, tight


def relaxed_decay_bound(ell: int, nu) -> np.ndarray:
    """log of 2^ell e^{-ell nu / 2}, which dominates the loose bound."""
    nu = np.asarray(nu, dtype=float)
    return ell * math.log(2.0) - 0.5 * ell * nu


def _logcosh(t):
    t = np.abs(np.asarray(t, dtype=float))
    return t + np.log1p(np.exp(-2.0 * t)) - math.log(2.0)


# ---------------------------------------------------------------------------
# SU(2,2)


def P_ell(ell: int, z1, z2) -> np.ndarray:
    """sum_i binom(ell, i)^2 (-1)^i |z1|^{2(ell-i)} |z2|^{2i}; P_ell(1, 0) = 1."""
    a = np.abs(np.asarray(z1)) ** 2
    b = np.abs(np.asarray(z2)) ** 2
    out = np.zeros(np.broadcast(a, b).shape)
    for i in range(ell + 1):
        out = out + math.comb(ell, i) ** 2 * (-1) ** i * a ** (ell - i) * b**i
    return out


def h_su22(z) -> np.ndarray:
    z = np.asarray(z)
    w = np.abs(z) ** 2
    return w[..., 0] + w[..., 1] - w[..., 2] - w[..., 3]


def psi_su22(ell: int, z) -> np.ndarray:
    """psi_ell on C^4 (homogeneous of degree 0); z has shape (..., 4)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    z = np.asarray(z, dtype=complex)
    n12 = np.abs(z[..., 0]) ** 2 + np.abs(z[..., 1]) ** 2
    if np.any(n12 < POLE_TOL):
        raise PoleProximity("|z1|^2 + |z2|^2 below 1e-30")
    return P_ell(ell, z[..., 0], z[..., 1]) * h_su22(z) ** (ell + 1) * n12 ** (-2 * ell - 1)


def random_su22_points(rng: np.random.Generator, n: int,
                       h_range: tuple[float, float] = (0.5, 2.0)) -> np.ndarray:
    """n points of C^4 with h(z) uniform in h_range."""
    hv = rng.uniform(*h_range, n)
    b = rng.uniform(0.0, 2.0, n)
    a = hv + b

    def sphere(radius2):
        w = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
        return w / np.linalg.norm(w, axis=1, keepdims=True) * np.sqrt(radius2)[:, None]

    return np.concatenate([sphere(a), sphere(b)], axis=1)


# ---------------------------------------------------------------------------
# Finite-difference Laplacians


@dataclass(frozen=True)
class LaplacianConfig:
    """Ambient finite-difference operator s * sum_i eps_i d_i^2 (model "ads")
    or s * 2h(z) * sum_j sigma_j (d_xj^2 + d_yj^2) / 4 (model "su22")."""

    h: float = DEFAULT_H
    s: float | None = None
    scheme: str = "central4"
    model: str = "ads"
    m: int = 2

    def __post_init__(self):
        if self.model not in ("ads", "su22"):
            raise ValueError(f"model must be ads or su22, not {self.model!r}")
        if self.scheme not in STENCILS:
            raise ValueError(f"scheme must be one of {sorted(STENCILS)}")
        if not self.h > 0:
            raise ValueError("step h must be positive")


def _second_derivatives(F: Callable, y: np.ndarray, h: float, scheme: str) -> np.ndarray:
    """d_i^2 F at every row of y (shape (N, d)), all stencil points in one call."""
    offsets, weights = STENCILS[scheme]
    N, d = y.shape
    nz = [k for k in offsets if k != 0]
    shifts = np.zeros((1 + len(nz) * d, d))
    for i in range(d):
        for j, k in enumerate(nz):
            shifts[1 + i * len(nz) + j, i] = k * h
    pts = y[None, :, :] + shifts[:, None, :]
    vals = np.asarray(F(pts.reshape(-1, d))).reshape(len(shifts), N)
    center = vals[0]
    w0 = weights[offsets.index(0)]
    out = np.empty((N, d), dtype=vals.dtype)
    for i in range(d):
        acc = w0 * center
        for j, k in enumerate(nz):
            acc = acc + weights[offsets.index(k)] * vals[1 + i * len(nz) + j]
        out[:, i] = acc / h**2
    return out


def ambient_signature(m: int) -> np.ndarray:
    return np.array([1.0, 1.0] + [-1.0] * m)


def degree0_extension(f: Callable, m: int) -> Callable:
    """F(y) = f(y / sqrt(Q(y)))."""
    eps = ambient_signature(m)

    def F(y):
        q = np.sum(eps * y * y, axis=-1)
        return f(y / np.sqrt(q)[..., None])

    return F


def _ads_operator(f: Callable, x: np.ndarray, h: float, scheme: str, m: int) -> np.ndarray:
    flat = x.reshape(-1, m + 2)
    d2 = _second_derivatives(degree0_extension(f, m), flat, h, scheme)
    return (d2 @ ambient_signature(m)).reshape(x.shape[:-1])


def _su22_operator(f: Callable, z: np.ndarray, h: float, scheme: str) -> np.ndarray:
    flat = z.reshape(-1, 4)
    real = np.empty((flat.shape[0], 8))
    real[:, 0::2], real[:, 1::2] = flat.real, flat.imag

    def F(r):
        zz = r[:, 0::2] + 1j * r[:, 1::2]
        return f(zz / np.sqrt(h_su22(zz))[:, None])

    d2 = _second_derivatives(F, real, h, scheme)
    sigma = np.repeat([-1.0, -1.0, 1.0, 1.0], 2)
    return (2.0 * h_su22(flat) * 0.25 * (d2 @ sigma)).reshape(z.shape[:-1])


def _raw_operator(f, pts, cfg: LaplacianConfig):
    if cfg.model == "ads":
        return _ads_operator(f, np.asarray(pts, dtype=float), cfg.h, cfg.scheme, cfg.m)
    return _su22_operator(f, np.asarray(pts, dtype=complex), cfg.h, cfg.scheme)


def laplacian_fd(f: Callable, x, cfg: LaplacianConfig | None = None):
    """Laplacian of f on AdS^{m+1} at x (shape (..., m + 2)).

    ``f`` maps an array of quadric points (shape (K, m + 2)) to K values.
    Without ``cfg`` a calibrated central4 configuration for m = x.shape[-1] - 2
    is used.
    """
    x = np.asarray(x, dtype=float)
    if cfg is None:
        cfg = calibrate("ads", x.shape[-1] - 2)
    if cfg.model != "ads":
        raise ValueError("laplacian_fd needs an ads configuration")
    if cfg.s is None:
        cfg = calibrate("ads", cfg.m, h=cfg.h, scheme=cfg.scheme)
    return cfg.s * _ads_operator(f, x, cfg.h, cfg.scheme, cfg.m)


def laplacian_su22_fd(f: Callable, z, cfg: LaplacianConfig | None = None):
    """Laplacian of f on SU(2,2)/U(1,2) at z (complex, shape (..., 4))."""
    z = np.asarray(z, dtype=complex)
    if cfg is None or cfg.s is None:
        kw = {} if cfg is None else dict(h=cfg.h, scheme=cfg.scheme)
        cfg = calibrate("su22", **kw)
    if cfg.model != "su22":
        raise ValueError("laplacian_su22_fd needs an su22 configuration")
    return cfg.s * _su22_operator(f, z, cfg.h, cfg.scheme)


@dataclass(frozen=True)
class Calibration:
    config: LaplacianConfig
    probe_ell: int
    residuals: tuple[tuple[float, float], ...]


def calibration_residuals(model: str, m: int, probe_ell: int, h: float, scheme: str,
                          n_samples: int = CALIBRATION_SAMPLES,
                          seed: int = CALIBRATION_SEED) -> list[tuple[float, float]]:
    """Median relative residual |s L f - lambda f| / |lambda f| per candidate s."""
    rng = np.random.default_rng(seed)
    cfg = LaplacianConfig(h=h, scheme=scheme, model=model, m=m)
    if model == "ads":
        lam = eigenvalue_ads(m, probe_ell)
        idx = SpectralIndex(probe_ell, 1, m)
        pts = lc.random_quadric_points(rng, n_samples, m=m, nu_max=3.0)
        f = functools.partial(psi_ads_value, idx)
    else:
        lam = eigenvalue_su22(probe_ell)
        pts = random_su22_points(rng, n_samples)
        f = functools.partial(psi_su22, probe_ell)
    if lam == 0:
        raise CalibrationAmbiguous(
            f"probe ell={probe_ell} has eigenvalue 0; every s fits, choose another probe")
    raw = _raw_operator(f, pts, cfg)
    target = lam * f(pts)
    out = []
    for s in S_CANDIDATES:
        res = np.abs(s * raw - target) / np.abs(target)
        out.append((s, float(np.median(res))))
    return out


@functools.lru_cache(maxsize=None)
def calibrate_full(model: str = "ads", m: int = 2, probe_ell: int | None = None,
                   h: float = DEFAULT_H, scheme: str = "central4") -> Calibration:
    if probe_ell is None:
        probe_ell = m + 1 if model == "ads" else 3
    res = calibration_residuals(model, m, probe_ell, h, scheme)
    ranked = sorted(res, key=lambda t: t[1])
    (s_best, r_best), (_, r_next) = ranked[0], ranked[1]
    if r_next <= TIE_RATIO * r_best:
        raise CalibrationAmbiguous(
            f"calibration of {model} (m={m}) ambiguous: residuals {r_best:.3g} vs {r_next:.3g}")
    cfg = LaplacianConfig(h=h, s=s_best, scheme=scheme, model=model, m=m)
    return Calibration(cfg, probe_ell, tuple(res))


def calibrate(model: str = "ads", m: int = 2, probe_ell: int | None = None,
              h: float = DEFAULT_H, scheme: str = "central4") -> LaplacianConfig:
    """Frozen LaplacianConfig with s chosen from the candidates +-1, +-1/2, +-2.

    Results are cached per (model, m, probe, h, scheme).
    """
    return calibrate_full(model, int(m), probe_ell, float(h), scheme).config


def with_step(cfg: LaplacianConfig, h: float) -> LaplacianConfig:
    return replace(cfg, h=float(h))


def eigen_check(idx: SpectralIndex, x, cfg: LaplacianConfig | None = None) -> np.ndarray:
    """Per-point residual of the eigen-equation for psi_ads: relative to
    |lambda psi|, or absolute when lambda = 0."""
    f = functools.partial(psi_ads_value, idx)
    lap = laplacian_fd(f, x, cfg)
    lam = idx.eigenvalue
    val = f(np.asarray(x, dtype=float))
    if lam == 0:
        return np.abs(lap)
    return np.abs(lap - lam * val) / np.abs(lam * val)


def eigen_check_su22(ell: int, z, cfg: LaplacianConfig | None = None) -> np.ndarray:
    f = functools.partial(psi_su22, ell)
    lap = laplacian_su22_fd(f, z, cfg)
    lam = eigenvalue_su22(ell)
    val = f(np.asarray(z, dtype=complex))
    if lam == 0:
        return np.abs(lap)
    return np.abs(lap - lam * val) / np.abs(lam * val)
