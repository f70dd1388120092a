"""Independent reference computations used to derive and freeze test values.

Nothing here imports the package.  Matrices are plain nested tuples and
every projection is computed from singular values or closed forms.
"""
from __future__ import annotations

import math

import numpy as np


def matmul(a, b):
    return ((a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]),
            (a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]))


def inv(a):
    return ((a[1][1], -a[0][1]), (-a[1][0], a[0][0]))


def eye():
    return ((1.0, 0.0), (0.0, 1.0))


def rot(t):
    c, s = math.cos(t), math.sin(t)
    return ((c, -s), (s, c))


def a_T(T):
    return ((math.exp(T / 2), 0.0), (0.0, math.exp(-T / 2)))


def mu_svd(g) -> float:
    """Cartan projection of SL2(R) as 2 log of the top singular value."""
    s = np.linalg.svd(np.array(g, dtype=float), compute_uv=False)
    return max(0.0, 2.0 * math.log(s[0]))


def nu_of_pair(g1, g2) -> float:
    return mu_svd(matmul(g1, inv(g2)))


def cyclic_nu_values(T: float, n_max: int) -> list[float]:
    """nu(gamma^n . x0) for gamma = (a_T, e), |n| <= n_max, by repeated products."""
    out = [0.0]
    g = eye()
    ginv = eye()
    step, step_inv = a_T(T), inv(a_T(T))
    for _ in range(n_max):
        g = matmul(g, step)
        ginv = matmul(ginv, step_inv)
        out += [mu_svd(g), mu_svd(ginv)]
    return out


def brute_count(values, R: float) -> int:
    return sum(1 for v in values if v < R)


def reduced_words(k: int, depth: int):
    """All reduced words over letters +-1..+-k, depth-first."""
    letters = [s for i in range(1, k + 1) for s in (i, -i)]
    out = [()]

    def grow(word):
        if len(word) == depth:
            return
        for s in letters:
            if word and word[-1] == -s:
                continue
            w = word + (s,)
            out.append(w)
            grow(w)

    grow(())
    return out


def word_matrix(word, gens):
    g = eye()
    for s in word:
        m = gens[abs(s) - 1]
        g = matmul(g, m if s > 0 else inv(m))
    return g


def schottky_gens(T: float, angles):
    return [matmul(matmul(rot(t), a_T(T)), rot(-t)) for t in angles]


def cosh_sum(ell: int, n_max: int = 300, weight=lambda n: 1.0) -> float:
    return math.fsum(weight(n) * math.cosh(n) ** (-ell) for n in range(1, n_max + 1))


def cyclic_series_x0(ell: int, T: float, n_max: int) -> complex:
    """phi at x0 for <(a_T, e)>: gamma^n x0 = (cosh(nT/2), 0, 0, sinh(nT/2))."""
    return 1.0 + 2.0 * math.fsum(math.cosh(n * T / 2) ** (-ell) for n in range(1, n_max + 1))


def second_derivative_fd(F, x, i, h):
    """Plain 3-point second difference along coordinate i."""
    e = np.zeros_like(x)
    e[i] = h
    return (F(x + e) - 2 * F(x) + F(x - e)) / h**2
