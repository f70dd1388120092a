r"""SL2(R) x SL2(R), the quadric model of anti-de Sitter space, and projections.

A point of AdS^{m+1} is a vector ``x`` in R^{m+2} with

    Q(x) = x1^2 + x2^2 - x3^2 - ... - x_{m+2}^2 = 1.

For m = 2 the quadric is identified with SL2(R) through

    x  <->  [[x1 + x4, -x2 + x3],
             [x2 + x3,  x1 - x4]]

and (g1, g2) acts by g -> g1 g g2^{-1}.  The basepoint is x0 = (1, 0, ..., 0),
i.e. the identity matrix, whose stabilizer is the diagonal subgroup H.

Everything here is vectorized: matrices are arrays of shape (..., 2, 2) and
points arrays of shape (..., m + 2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadricError

QUADRIC_TOL = 1e-9
DET_TOL = 1e-9
CLAMP_WINDOW = 1e-12
RENORMALIZE_EVERY = 64

SQRT2 = float(np.sqrt(2.0))


# ---------------------------------------------------------------------------
# 2x2 matrices


def identity2() -> np.ndarray:
    return np.eye(2)


def rotation(theta) -> np.ndarray:
    """R(theta) = [[cos, -sin], [sin, cos]]; vectorized over ``theta``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def diag_a(T) -> np.ndarray:
    """a_T = diag(e^{T/2}, e^{-T/2}), normalized so that mu2(a_T) = |T|."""
    T = np.asarray(T, dtype=float)
    out = np.zeros(T.shape + (2, 2))
    out[..., 0, 0] = np.exp(T / 2)
    out[..., 1, 1] = np.exp(-T / 2)
    return out


def det2(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def sl2_inv(g: np.ndarray) -> np.ndarray:
    """Inverse of a unit-determinant matrix (adjugate; exact in floating point)."""
    g = np.asarray(g, dtype=float)
    out = np.empty_like(g)
    out[..., 0, 0] = g[..., 1, 1]
    out[..., 0, 1] = -g[..., 0, 1]
    out[..., 1, 0] = -g[..., 1, 0]
    out[..., 1, 1] = g[..., 0, 0]
    return out


def renormalize(g: np.ndarray) -> np.ndarray:
    """Rescale by 1/sqrt(det) to restore det = 1 after long product chains."""
    g = np.asarray(g, dtype=float)
    return g / np.sqrt(det2(g))[..., None, None]


def check_sl2(g: np.ndarray, tol: float = DET_TOL) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape[-2:] != (2, 2):
        raise QuadricError(f"expected 2x2 matrices, got shape {g.shape}")
    err = np.max(np.abs(det2(g) - 1.0), initial=0.0)
    if err > tol:
        raise QuadricError(f"|det - 1| = {err:.3e} exceeds {tol:g}")
    return g


def product_chain(mats) -> np.ndarray:
    """Left-to-right product of a sequence of SL2 matrices, renormalized
    every ``RENORMALIZE_EVERY`` factors."""
    acc = np.eye(2)
    for i, m in enumerate(mats, start=1):
        acc = acc @ m
        if i % RENORMALIZE_EVERY == 0:
            acc = renormalize(acc)
    return acc


def sl2_exp(xi: np.ndarray) -> np.ndarray:
    """exp of a traceless 2x2 matrix, in closed form (xi^2 = -det(xi) I)."""
    xi = np.asarray(xi, dtype=float)
    if abs(xi[0, 0] + xi[1, 1]) > 1e-12:
        raise ValueError("sl2_exp expects a traceless matrix")
    delta = -det2(xi)
    if delta > 0:
        s = np.sqrt(delta)
        return np.cosh(s) * np.eye(2) + (np.sinh(s) / s) * xi
    if delta < 0:
        s = np.sqrt(-delta)
        return np.cos(s) * np.eye(2) + (np.sin(s) / s) * xi
    return np.eye(2) + xi


def sl2_speed(xi: np.ndarray) -> float:
    """Norm of xi matched to mu2: mu2(exp(t xi)) <= t * sl2_speed(xi), with
    equality to first order at t = 0.  Twice the operator norm of the
    symmetric part."""
    xi = np.asarray(xi, dtype=float)
    sym = (xi + xi.T) / 2
    return float(2 * np.max(np.abs(np.linalg.eigvalsh(sym))))


# ---------------------------------------------------------------------------
# Cartan projection


def arcosh1p(u):
    """arcosh(1 + u) for u >= 0, accurate near u = 0."""
    u = np.asarray(u, dtype=float)
    return np.log1p(u + np.sqrt(u * (2.0 + u)))


def mu2(g):
    """Cartan projection of SL2(R): log of the top eigenvalue of g^T g.

    Equals arcosh(tr(g^T g) / 2) = d_H2(y0, g y0).  For det g = 1 one has
    tr(g^T g) - 2 = (a - d)^2 + (b + c)^2, which is used here because it is
    free of cancellation both near the identity and for huge entries.
    """
    g = np.asarray(g, dtype=float)
    a, b = g[..., 0, 0], g[..., 0, 1]
    c, d = g[..., 1, 0], g[..., 1, 1]
    u = 0.5 * ((a - d) ** 2 + (b + c) ** 2)
    return arcosh1p(u)


def mu2_trace(g):
    """Same as :func:`mu2` but through the literal trace formula, with the
    clamp-or-reject policy for arguments slightly below 1."""
    g = np.asarray(g, dtype=float)
    u = 0.5 * np.sum(g * g, axis=(-2, -1)) - 1.0
    if np.any(u < -CLAMP_WINDOW):
        raise QuadricError("tr(g^T g)/2 < 1 beyond roundoff; not in SL2")
    return arcosh1p(np.maximum(u, 0.0))


@dataclass(frozen=True)
class CartanPair:
    mu1: float
    mu2: float

    @property
    def norm_a(self) -> float:
        return float(np.hypot(self.mu1, self.mu2))

    @property
    def dist_to_h(self) -> float:
        """d_a(mu, mu(H)): distance to the diagonal."""
        return abs(self.mu1 - self.mu2) / SQRT2


def mu_norm_a(m1, m2):
    return np.hypot(m1, m2)


def dist_to_h(m1, m2):
    return np.abs(np.asarray(m1) - np.asarray(m2)) / SQRT2


# ---------------------------------------------------------------------------
# Group elements


@dataclass(frozen=True, eq=False)
class GroupElement:
    """(g1, g2) in SL2(R) x SL2(R), acting on AdS^3 by g -> g1 g g2^{-1}."""

    g1: np.ndarray
    g2: np.ndarray

    def __post_init__(self):
        g1 = check_sl2(np.array(self.g1, dtype=float))
        g2 = check_sl2(np.array(self.g2, dtype=float))
        g1.setflags(write=False)
        g2.setflags(write=False)
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "g2", g2)

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(np.eye(2), np.eye(2))

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.g1 @ other.g1, self.g2 @ other.g2)

    def inverse(self) -> "GroupElement":
        return GroupElement(sl2_inv(self.g1), sl2_inv(self.g2))

    def allclose(self, other: "GroupElement", tol: float = 1e-9) -> bool:
        return bool(
            np.max(np.abs(self.g1 - other.g1)) <= tol
            and np.max(np.abs(self.g2 - other.g2)) <= tol
        )

    def __repr__(self):
        return f"GroupElement(g1={self.g1.tolist()}, g2={self.g2.tolist()})"


def mu_pair(gamma: GroupElement) -> CartanPair:
    return CartanPair(float(mu2(gamma.g1)), float(mu2(gamma.g2)))


def nu_elem(gamma: GroupElement) -> float:
    """Polar projection of (g1, g2): mu2(g1 g2^{-1})."""
    return float(mu2(gamma.g1 @ sl2_inv(gamma.g2)))


# ---------------------------------------------------------------------------
# The quadric


def basepoint(m: int = 2) -> np.ndarray:
    x = np.zeros(m + 2)
    x[0] = 1.0
    return x


def quadric_form(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] ** 2 + x[..., 1] ** 2 - np.sum(x[..., 2:] ** 2, axis=-1)


def check_quadric(x, tol: float = QUADRIC_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 3:
        raise QuadricError(f"quadric points need at least 3 coordinates, got {x.shape}")
    err = np.max(np.abs(quadric_form(x) - 1.0), initial=0.0)
    if err > tol:
        raise QuadricError(f"|Q(x) - 1| = {err:.3e} exceeds {tol:g}")
    return x


def quadric_to_matrix(x, tol: float = QUADRIC_TOL) -> np.ndarray:
    x = check_quadric(x, tol)
    if x.shape[-1] != 4:
        raise QuadricError("the matrix model exists only for AdS^3 (4 coordinates)")
    return _to_matrix(x)


def _to_matrix(x: np.ndarray) -> np.ndarray:
    x1, x2, x3, x4 = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    out = np.empty(x.shape[:-1] + (2, 2))
    out[..., 0, 0] = x1 + x4
    out[..., 0, 1] = -x2 + x3
    out[..., 1, 0] = x2 + x3
    out[..., 1, 1] = x1 - x4
    return out


def matrix_to_quadric(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    a, b = g[..., 0, 0], g[..., 0, 1]
    c, d = g[..., 1, 0], g[..., 1, 1]
    return np.stack([(a + d) / 2, (c - b) / 2, (b + c) / 2, (a - d) / 2], axis=-1)


def act(gamma: GroupElement, x) -> np.ndarray:
    """gamma . x for points x of AdS^3 (shape (..., 4))."""
    return act_arrays(gamma.g1, gamma.g2, x)


def act_arrays(g1, g2, x) -> np.ndarray:
    """Vectorized action; g1, g2, x broadcast against each other."""
    m = _to_matrix(np.asarray(x, dtype=float))
    return matrix_to_quadric(np.asarray(g1) @ m @ sl2_inv(g2))


def nu_point(x):
    """Pseudo-distance to the origin, arcosh(2 x1^2 + 2 x2^2 - 1).

    On Q = 1 the argument equals 1 + 2 (x3^2 + ... + x_{m+2}^2), which is the
    form evaluated (no cancellation near the compact orbit x1^2 + x2^2 = 1).
    """
    x = np.asarray(x, dtype=float)
    return arcosh1p(2.0 * np.sum(x[..., 2:] ** 2, axis=-1))


def nu_point_literal(x):
    """arcosh(2 x1^2 + 2 x2^2 - 1) with the clamp window; for cross-checks."""
    x = np.asarray(x, dtype=float)
    u = 2.0 * (x[..., 0] ** 2 + x[..., 1] ** 2) - 2.0
    if np.any(u < -CLAMP_WINDOW):
        raise QuadricError("2 x1^2 + 2 x2^2 - 1 < 1 beyond roundoff")
    return arcosh1p(np.maximum(u, 0.0))


def random_sl2(rng: np.random.Generator, size=None, mu_max: float = 3.0) -> np.ndarray:
    """R(alpha) a_s R(beta) with s uniform in [0, mu_max]; mu2 of the result is s."""
    alpha = rng.uniform(0, 2 * np.pi, size)
    beta = rng.uniform(0, 2 * np.pi, size)
    s = rng.uniform(0, mu_max, size)
    return rotation(alpha) @ diag_a(s) @ rotation(beta)


def random_quadric_points(rng: np.random.Generator, n: int, m: int = 2,
                          nu_max: float = 3.0) -> np.ndarray:
    """n points of AdS^{m+1} with nu uniform in [0, nu_max].

    Uses x = (cosh(nu/2) cos phi, cosh(nu/2) sin phi, sinh(nu/2) u) with u a
    uniform unit vector of R^m.
    """
    nu = rng.uniform(0, nu_max, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    u = rng.normal(size=(n, m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    c, s = np.cosh(nu / 2), np.sinh(nu / 2)
    return np.column_stack([c * np.cos(phi), c * np.sin(phi), s[:, None] * u])
