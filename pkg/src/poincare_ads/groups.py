"""Discrete subgroups of SL2(R) x SL2(R) and their reduced-word enumeration.

Words are tuples of signed generator indices (``+i`` for the i-th generator,
``-i`` for its inverse, 1-based).  Words are ordered by length, then
lexicographically for the alphabet order ``1, -1, 2, -2, ...``.

A group may additionally contain the central element (e, -e), which acts on
AdS^3 as the antipodal map x -> -x.  It is not a word letter: when present,
every reduced word w is followed in the table by the row w.z with
z = (e, -e).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import lie_core as lc
from .errors import FreenessUnverified, MemoryBudgetExceeded
from .lie_core import GroupElement

DEFAULT_MEMORY_BUDGET = 2 * 1024**3
COMPACT_TOL = 1e-9
ANTIPODE_TOL = 1e-9


def _letter_names(k: int) -> list[str]:
    base = "abcdefghijklmnopqrstuvwxy"
    if k > len(base):
        return [f"g{i + 1}" for i in range(k)]
    return list(base[:k])


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """Generators of Gamma.

    ``kind`` is ``"trivial"`` (no generators), ``"cyclic"`` (one) or
    ``"free"`` (two or more, assumed to generate a free group).
    """

    kind: str
    gens: tuple[GroupElement, ...]
    labels: tuple[str, ...] = ()
    antipodal: bool = False

    def __post_init__(self):
        gens = tuple(self.gens)
        object.__setattr__(self, "gens", gens)
        expected = {"trivial": (0, 0), "cyclic": (1, 1), "free": (2, None)}
        if self.kind not in expected:
            raise ValueError(f"unknown kind {self.kind!r}")
        lo, hi = expected[self.kind]
        if len(gens) < lo or (hi is not None and len(gens) > hi):
            raise ValueError(f"kind {self.kind!r} does not allow {len(gens)} generators")
        for i, g in enumerate(gens):
            # Compact generators (in SO2 x SO2, including +-identity and the
            # antipode) would make the word enumeration revisit finitely many
            # elements forever.
            if lc.mu2(g.g1) <= COMPACT_TOL and lc.mu2(g.g2) <= COMPACT_TOL:
                raise ValueError(
                    f"generator {i} lies in the compact subgroup SO2 x SO2; "
                    "use antipodal=True for (e, -e) and drop elliptic generators"
                )
        labels = tuple(self.labels) or tuple(_letter_names(len(gens)))
        if len(labels) != len(gens):
            raise ValueError("one label per generator required")
        object.__setattr__(self, "labels", labels)

    @property
    def rank(self) -> int:
        return len(self.gens)

    @property
    def alphabet(self) -> list[int]:
        """Signed letters in enumeration order."""
        out = []
        for i in range(1, self.rank + 1):
            out += [i, -i]
        return out

    def letter_element(self, letter: int) -> GroupElement:
        g = self.gens[abs(letter) - 1]
        return g if letter > 0 else g.inverse()

    def word_element(self, word: Sequence[int]) -> GroupElement:
        g1 = lc.product_chain([self.letter_element(s).g1 for s in word])
        g2 = lc.product_chain([self.letter_element(s).g2 for s in word])
        return GroupElement(lc.renormalize(g1), lc.renormalize(g2))

    def word_label(self, word: Sequence[int]) -> str:
        if not word:
            return "e"
        parts = []
        for s in word:
            name = self.labels[abs(s) - 1]
            parts.append(name if s > 0 else name.upper() if len(name) == 1 else name + "^-1")
        return "".join(parts)

    def with_antipode(self, flag: bool = True) -> "GeneratorSet":
        return replace(self, antipodal=flag)

    def word_count(self, depth: int) -> int:
        """Number of table rows for reduced words of length <= depth."""
        if self.kind == "trivial":
            n = 1
        elif self.kind == "cyclic":
            n = 1 + 2 * depth
        else:
            k2 = 2 * self.rank
            n = 1 + sum(k2 * (k2 - 1) ** (L - 1) for L in range(1, depth + 1))
        return 2 * n if self.antipodal else n


def reduce_word(word: Sequence[int]) -> tuple[int, ...]:
    out: list[int] = []
    for s in word:
        if out and out[-1] == -s:
            out.pop()
        else:
            out.append(s)
    return tuple(out)


def invert_word(word: Sequence[int]) -> tuple[int, ...]:
    return tuple(-s for s in reversed(word))


def is_reduced(word: Sequence[int]) -> bool:
    return all(a != -b for a, b in zip(word, word[1:]))


# ---------------------------------------------------------------------------
# Constructions


def make_trivial(antipodal: bool = False) -> GeneratorSet:
    return GeneratorSet("trivial", (), antipodal=antipodal)


def make_antipodal() -> GeneratorSet:
    """Gamma = <(e, -e)>, of order two; acts on AdS^3 by x -> -x."""
    return make_trivial(antipodal=True)


def make_cyclic(T: float, side: str = "left", T_right: float | None = None) -> GeneratorSet:
    """Gamma generated by (a_T, e), (e, a_T) or (a_T, a_T')."""
    if not T > 0:
        raise ValueError("T must be positive")
    aT = lc.diag_a(T)
    if side == "left":
        g = GroupElement(aT, np.eye(2))
    elif side == "right":
        g = GroupElement(np.eye(2), aT)
    elif side == "both":
        Tr = T / 2 if T_right is None else T_right
        g = GroupElement(aT, lc.diag_a(Tr))
    else:
        raise ValueError(f"side must be left, right or both, not {side!r}")
    return GeneratorSet("cyclic", (g,))


def schottky_matrices(k: int, T: float, angles: Sequence[float]) -> list[np.ndarray]:
    """Hyperbolic generators R(theta) a_T R(theta)^{-1} of translation length T."""
    angles = [float(a) for a in angles]
    if k < 2 or len(angles) != k:
        raise ValueError("need k >= 2 and exactly k angles")
    if not T > 0:
        raise ValueError("T must be positive")
    for i in range(k):
        for j in range(i):
            # conjugation by R(theta) rotates H^2 by 2 theta: axes repeat mod pi/2
            d = (angles[i] - angles[j]) % (math.pi / 2)
            if min(d, math.pi / 2 - d) < 1e-9:
                raise ValueError("angles must be pairwise distinct mod pi/2")
    aT = lc.diag_a(T)
    return [lc.rotation(a) @ aT @ lc.rotation(-a) for a in angles]


def verify_free(mats: Sequence[np.ndarray], depth: int = 8, min_mu: float = 0.1,
                max_rows: int = 3_000_000) -> float:
    """Empirical freeness check: every nontrivial reduced word of length
    <= depth has mu2 > min_mu.  Returns the observed minimum."""
    gs = GeneratorSet("free" if len(mats) > 1 else "cyclic",
                      tuple(GroupElement(m, np.eye(2)) for m in mats))
    while depth > 1 and gs.word_count(depth) > max_rows:
        depth -= 1
    table = enumerate_words(gs, depth)
    nontrivial = table.lengths > 0
    observed = float(np.min(table.mu1[nontrivial]))
    if not observed > min_mu:
        raise FreenessUnverified(
            f"min mu2 over nontrivial words of length <= {depth} is {observed:.3g} "
            f"(needs > {min_mu})"
        )
    return observed


def make_schottky(k: int, T: float, angles: Sequence[float], check_depth: int = 8) -> GeneratorSet:
    """Free group on k hyperbolic generators in the first factor, identity
    in the second (rho trivial)."""
    mats = schottky_matrices(k, T, angles)
    verify_free(mats, depth=check_depth)
    return GeneratorSet("free", tuple(GroupElement(m, np.eye(2)) for m in mats))


def make_pair(j_gens: Sequence[np.ndarray], rho_gens: Sequence[np.ndarray],
              verify: bool = True, check_depth: int = 8) -> GeneratorSet:
    """Gamma = {(j(w), rho(w))} for a free (or cyclic) group."""
    if len(j_gens) != len(rho_gens):
        raise ValueError(f"arity mismatch: {len(j_gens)} j-images vs {len(rho_gens)} rho-images")
    if not j_gens:
        raise ValueError("at least one generator required")
    if verify and len(j_gens) > 1:
        verify_free(j_gens, depth=check_depth)
    gens = tuple(GroupElement(j, r) for j, r in zip(j_gens, rho_gens))
    return GeneratorSet("free" if len(gens) > 1 else "cyclic", gens)


def j_images(gens: GeneratorSet) -> list[np.ndarray]:
    return [g.g1 for g in gens.gens]


def rho_images(gens: GeneratorSet) -> list[np.ndarray]:
    return [g.g2 for g in gens.gens]


def deform(pair: GeneratorSet, t: float, mode: str, params) -> GeneratorSet:
    """Replace rho by a one-parameter family rho_t with rho_0 trivial.

    rotation: rho_t(g_i) = R(t theta_i), ``params`` the angles theta_i.
    shear:    rho_t(g_i) = exp(t xi_i), ``params`` traceless 2x2 matrices.
    """
    params = list(params)
    if len(params) != pair.rank:
        raise ValueError("one deformation parameter per generator required")
    if mode == "rotation":
        rho = [lc.rotation(t * float(th)) for th in params]
    elif mode == "shear":
        rho = [lc.sl2_exp(t * np.asarray(xi, dtype=float)) for xi in params]
    else:
        raise ValueError(f"mode must be rotation or shear, not {mode!r}")
    gens = tuple(GroupElement(g.g1, r) for g, r in zip(pair.gens, rho))
    return replace(pair, gens=gens)


def conjugate(gens: GeneratorSet, g: GroupElement) -> GeneratorSet:
    """Generators gamma_i -> g^{-1} gamma_i g."""
    gi = g.inverse()
    new = tuple(gi @ gam @ g for gam in gens.gens)
    return replace(gens, gens=new)


# ---------------------------------------------------------------------------
# Orbit table


@dataclass(frozen=True, eq=False)
class OrbitTable:
    """All reduced words of length <= depth with their matrices and projections.

    Array columns (one entry per row): ``words`` (alphabet indices, padded
    with -1), ``lengths``, ``antipode`` (row carries the central factor),
    ``g1``, ``g2``, ``mu1``, ``mu2``, ``nu`` (nu of gamma . basepoint) and
    ``shell`` (floor(nu / shell_width)).
    """

    gens: GeneratorSet
    depth: int
    basepoint: np.ndarray
    shell_width: float
    words: np.ndarray
    lengths: np.ndarray
    antipode: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    nu: np.ndarray
    shell: np.ndarray

    def __post_init__(self):
        for name in ("basepoint", "words", "lengths", "antipode", "g1", "g2",
                     "mu1", "mu2", "nu", "shell"):
            getattr(self, name).setflags(write=False)

    def __len__(self) -> int:
        return int(self.lengths.shape[0])

    def word(self, i: int) -> tuple[int, ...]:
        alpha = self.gens.alphabet
        return tuple(alpha[j] for j in self.words[i, : self.lengths[i]])

    def label(self, i: int) -> str:
        lab = self.gens.word_label(self.word(i))
        if self.antipode[i]:
            lab = ("" if lab == "e" else lab) + "z"
        return lab

    def element(self, i: int) -> GroupElement:
        return GroupElement(self.g1[i], self.g2[i])

    @property
    def identity_rows(self) -> np.ndarray:
        return (self.lengths == 0) & ~self.antipode

    @property
    def is_x0(self) -> bool:
        return self.basepoint.shape == (4,) and np.array_equal(self.basepoint, lc.basepoint(2))

    def points(self, x=None) -> np.ndarray:
        """gamma . x for every row."""
        x = self.basepoint if x is None else lc.check_quadric(x)
        return lc.matrix_to_quadric(self.g1 @ lc.quadric_to_matrix(x) @ lc.sl2_inv(self.g2))

    def inverse_points(self, x=None) -> np.ndarray:
        """gamma^{-1} . x for every row."""
        x = self.basepoint if x is None else lc.check_quadric(x)
        return lc.matrix_to_quadric(lc.sl2_inv(self.g1) @ lc.quadric_to_matrix(x) @ self.g2)

    def nu_at(self, x=None) -> np.ndarray:
        """nu(gamma . x) for every row, computed from the product matrix."""
        if x is None or np.array_equal(np.asarray(x, dtype=float), self.basepoint):
            return self.nu
        m = lc.quadric_to_matrix(x)
        return lc.mu2(self.g1 @ m @ lc.sl2_inv(self.g2))

    def truncate(self, depth: int) -> "OrbitTable":
        """The sub-table of words of length <= depth (same order)."""
        if depth > self.depth:
            raise ValueError("cannot truncate to a larger depth")
        keep = self.lengths <= depth
        cols = {k: np.ascontiguousarray(getattr(self, k)[keep]) for k in
                ("lengths", "antipode", "g1", "g2", "mu1", "mu2", "nu", "shell")}
        words = np.ascontiguousarray(self.words[keep][:, : max(depth, 1)])
        return replace(self, depth=int(depth), words=words, **cols)

    def with_shells(self, r: float) -> "OrbitTable":
        if not r > 0:
            raise ValueError("shell width must be positive")
        return replace(self, shell_width=float(r), shell=shell_index(self.nu, r))

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["word", "mu1", "mu2", "nu", "shell"])
        for i in range(len(self)):
            w.writerow([self.label(i), fmt(self.mu1[i]), fmt(self.mu2[i]),
                        fmt(self.nu[i]), int(self.shell[i])])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())


def shell_index(nu, r: float) -> np.ndarray:
    """floor(nu / r), with values within 1e-9 (relative) below a shell edge
    snapped up so that exact multiples of r land on their own shell."""
    nu = np.asarray(nu, dtype=float)
    return np.floor(nu / r + 1e-9 * np.maximum(nu / r, 1.0)).astype(np.int64)


def fmt(v) -> str:
    """Reals with 17 significant digits."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def _row_bytes(depth: int) -> int:
    # two 2x2 float64 matrices, five scalar columns, one byte per letter;
    # x3 for the parent/child copies alive while a level is grown.
    return 3 * (64 + 5 * 8 + 1 + max(depth, 1))


def admissible_depth(gens: GeneratorSet, budget: int) -> int:
    if gens.kind == "trivial":
        return 10**9
    n = 0
    while gens.word_count(n + 1) * _row_bytes(n + 1) <= budget:
        n += 1
        if n > 10**6:
            break
    return n


def _grow(gens: GeneratorSet, start_words, start_g1, start_g2, depth: int):
    """Extend the given words (all of equal length) to every reduced
    continuation up to ``depth``.  Returns a list of levels, each a triple
    (words, g1, g2), in (length, lex) order."""
    A = 2 * gens.rank
    letter_g1 = np.array([gens.letter_element(s).g1 for s in gens.alphabet])
    letter_g2 = np.array([gens.letter_element(s).g2 for s in gens.alphabet])
    inverse_of = np.arange(A) ^ 1
    words, g1, g2 = start_words, start_g1, start_g2
    levels = [(words, g1, g2)]
    length = words.shape[1]
    while length < depth:
        n = words.shape[0]
        parent = np.repeat(np.arange(n), A)
        letter = np.tile(np.arange(A), n)
        keep = letter != inverse_of[words[parent, -1]]
        parent, letter = parent[keep], letter[keep]
        words = np.concatenate([words[parent], letter[:, None].astype(np.int8)], axis=1)
        g1 = g1[parent] @ letter_g1[letter]
        g2 = g2[parent] @ letter_g2[letter]
        length += 1
        if length % lc.RENORMALIZE_EVERY == 0:
            g1, g2 = lc.renormalize(g1), lc.renormalize(g2)
        levels.append((words, g1, g2))
    return levels


def enumerate_words(gens: GeneratorSet, depth: int, basepoint=None,
                    shell_width: float = 1.0, workers: int = 1,
                    memory_budget: int = DEFAULT_MEMORY_BUDGET) -> OrbitTable:
    """Materialize every reduced word of length <= depth.

    With ``workers > 1`` the subtrees below each first letter are grown in
    parallel and merged back into the global (length, lex) order; the result
    is identical to the sequential one.
    """
    depth = int(depth)
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if gens.word_count(depth) * _row_bytes(depth) > memory_budget:
        raise MemoryBudgetExceeded(depth, admissible_depth(gens, memory_budget), memory_budget)
    x = lc.basepoint(2) if basepoint is None else lc.check_quadric(np.array(basepoint, dtype=float))

    width = max(depth, 1)
    blocks_w = [np.full((1, width), -1, dtype=np.int8)]
    blocks_len = [np.zeros(1, dtype=np.int64)]
    blocks_g1 = [np.eye(2)[None]]
    blocks_g2 = [np.eye(2)[None]]

    if gens.rank > 0 and depth > 0:
        firsts = list(range(2 * gens.rank))

        def subtree(a: int):
            s = gens.alphabet[a]
            el = gens.letter_element(s)
            return _grow(gens, np.array([[a]], dtype=np.int8), el.g1[None].copy(),
                         el.g2[None].copy(), depth)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(subtree, firsts))
        else:
            parts = [subtree(a) for a in firsts]
        for L in range(depth):
            for part in parts:
                w, a1, a2 = part[L]
                padded = np.full((w.shape[0], width), -1, dtype=np.int8)
                padded[:, : w.shape[1]] = w
                blocks_w.append(padded)
                blocks_len.append(np.full(w.shape[0], L + 1, dtype=np.int64))
                blocks_g1.append(a1)
                blocks_g2.append(a2)

    words = np.concatenate(blocks_w)
    lengths = np.concatenate(blocks_len)
    g1 = np.concatenate(blocks_g1)
    g2 = np.concatenate(blocks_g2)
    antipode = np.zeros(len(lengths), dtype=bool)
    if gens.antipodal:
        n = len(lengths)
        idx = np.repeat(np.arange(n), 2)
        words, lengths, g1, g2 = words[idx], lengths[idx], g1[idx], g2[idx].copy()
        antipode = np.tile([False, True], n)
        g2[antipode] *= -1.0
    return _finish(gens, depth, x, shell_width, words, lengths, antipode, g1, g2)


def _finish(gens, depth, x, shell_width, words, lengths, antipode, g1, g2) -> OrbitTable:
    mu1 = lc.mu2(g1)
    mu2 = lc.mu2(g2)
    nu = lc.mu2(g1 @ lc.quadric_to_matrix(x) @ lc.sl2_inv(g2))
    shell = shell_index(nu, shell_width)
    return OrbitTable(gens, depth, x, float(shell_width), words, lengths, antipode,
                      g1, g2, mu1, mu2, nu, shell)


def detect_antipode(table: OrbitTable, tol: float = ANTIPODE_TOL) -> bool:
    """True iff some enumerated element is (e, -e) or (-e, e)."""
    if len(table) == 0:
        raise ValueError("empty table")
    e = np.eye(2)
    d1p = np.max(np.abs(table.g1 - e), axis=(1, 2))
    d1m = np.max(np.abs(table.g1 + e), axis=(1, 2))
    d2p = np.max(np.abs(table.g2 - e), axis=(1, 2))
    d2m = np.max(np.abs(table.g2 + e), axis=(1, 2))
    hit = ((d1p <= tol) & (d2m <= tol)) | ((d1m <= tol) & (d2p <= tol))
    return bool(np.any(hit))
