import math

import numpy as np
import pytest

import oracles
from poincare_ads import groups as gr
from poincare_ads import lie_core as lc
from poincare_ads import properness as pr
from poincare_ads import series as se
from poincare_ads.errors import DivergentAtDepth, NearFixer, TailTooLarge
from poincare_ads.lie_core import GroupElement
from poincare_ads.spectra import SpectralIndex

# frozen from oracles.cosh_sum / cyclic_series_x0
TAIL_EXAMPLE = 0.41916557193004762
COSH3_SUM = 0.29197696602162370
VERIFY_SUM = 0.37353162657791635  # sum_{n >= 1} 2^n cosh(n)^{-4}
COSH2_SUM = 0.50204216079890743
REMAINDER_L2 = 1.0040843215978149
REMAINDER_L3 = 0.58395393204324740
PHI3_CYCLIC = 1.5839539320432474


def test_frozen_values_reproduce():
    assert oracles.cosh_sum(3) == pytest.approx(COSH3_SUM, abs=1e-15)
    assert oracles.cosh_sum(2) == pytest.approx(COSH2_SUM, abs=1e-15)
    assert oracles.cosh_sum(4, weight=lambda n: 2.0**n) == pytest.approx(VERIFY_SUM, abs=1e-15)
    assert oracles.cyclic_series_x0(3, 2.0, 20) == pytest.approx(PHI3_CYCLIC, abs=1e-15)


def test_closed_threshold():
    assert se.ell_threshold_closed(1.0, math.log(2), 1.0) == 4
    assert se.ell_threshold_closed(1.0, 0.0, 1.0) == 2
    with pytest.raises(ValueError):
        se.ell_threshold_closed(0.5, 0.0, 1.0)
    # sufficient, not sharp: the verification sum is already below 1 at d
    d = se.ell_threshold_closed(1.0, math.log(2), 1.0)
    assert oracles.cosh_sum(d, weight=lambda n: 2.0**n) == pytest.approx(VERIFY_SUM, abs=1e-15)
    assert VERIFY_SUM < 1
    assert se.threshold_sum(1.0, math.log(2), 1.0, d) == pytest.approx(VERIFY_SUM, abs=1e-15)
    assert se.threshold_sum(1.0, 0.0, 1.0, 2) == pytest.approx(COSH2_SUM, abs=1e-15)


class _Fit:
    def __init__(self, S, U, r):
        self.S, self.U, self.r = S, U, r


def test_tail_bound_examples():
    # S = 1, U = 0, r = 4, ell = 3, n0 = 1: 8 e^{-3} / (1 - e^{-3})
    assert math.exp(se.tail_bound(3, _Fit(1.0, 0.0, 4.0), 1)) == pytest.approx(TAIL_EXAMPLE, rel=1e-14)
    assert COSH3_SUM <= TAIL_EXAMPLE
    fit = _Fit(2.0, 0.0, 4.0)
    # S 2^ell e^{-ell n0} / (1 - e^{-ell}) for r = 4
    expect = 2 * 8 * math.exp(-3 * 5) / (1 - math.exp(-3))
    assert math.exp(se.tail_bound(3, fit, 5)) == pytest.approx(expect, rel=1e-14)
    assert se.tail_bound(3, fit, -1) == -math.inf
    assert se.tail_bound(2, _Fit(2.0, 3.0, 4.0), 1) == math.inf


def test_tail_dominates_exact_sum():
    # shells of width 4 with two elements each, |psi| <= cosh(n)^{-ell}
    fit = _Fit(2.0, 0.0, 4.0)
    for ell in (2, 3, 6):
        for n0 in (1, 3):
            exact = 2 * math.fsum(math.cosh(n) ** -ell for n in range(n0, 400))
            assert exact <= math.exp(se.tail_bound(ell, fit, n0))


def test_cyclic_certificates(cyclic2_20):
    fit = pr.growth_fit(cyclic2_20, r=2.0)
    rep = se.spectrum_certified(cyclic2_20, fit, ell_max=12)
    r2, r3 = rep.rows[0].certificate, rep.rows[1].certificate
    assert r2.remainder == pytest.approx(REMAINDER_L2, rel=1e-13)
    assert r3.remainder == pytest.approx(REMAINDER_L3, rel=1e-13)
    assert not rep.rows[0].certified and rep.rows[1].certified
    assert rep.ell0 == 3 and r3.tail < 1e-11
    assert rep.closed_threshold == 12
    assert rep.rows[0].verdict_label == "not_certified"


def test_certificate_soundness(cyclic2_20, schottky_gens, schottky8):
    deeper = gr.enumerate_words(gr.make_cyclic(2.0), 24)
    for ell in range(3, 9):
        cert = se.certify_nonzero(SpectralIndex(ell), cyclic2_20, pr.growth_fit(cyclic2_20, r=2.0))
        direct = se.poincare_eval(SpectralIndex(ell), deeper).value
        assert cert.margin <= abs(direct) + 1e-9
    deep = gr.enumerate_words(schottky_gens, 10)
    for ell in (2, 4, 7):
        cert = se.certify_nonzero(SpectralIndex(ell), schottky8)
        assert cert.margin <= abs(se.poincare_eval(SpectralIndex(ell), deep).value) + 1e-9


def test_eval_matches_oracle(cyclic2_20):
    v = se.poincare_eval(SpectralIndex(3), cyclic2_20)
    assert v.value.real == pytest.approx(PHI3_CYCLIC, abs=1e-15)
    assert v.value.imag == 0 and v.terms_used == 41
    assert se.truncated_values(SpectralIndex(3), cyclic2_20, lc.basepoint()) == pytest.approx(
        PHI3_CYCLIC, abs=1e-14)


def test_divergent_at_depth(cyclic2_20):
    # envelope growth U = 5 beats the decay rate ell r / 4 = 1
    fit = pr.GrowthFit(2.0, 2.0, 5.0, 2.0, pr.LinearFloor(2.0, 0.0),
                       (1,), 1, 42.0, 20, (1.0, 0.0, 0.0, 0.0))
    with pytest.raises(DivergentAtDepth):
        se.poincare_eval(SpectralIndex(2), cyclic2_20, fit=fit)
    with pytest.raises(ValueError):
        se.poincare_eval(SpectralIndex(1), cyclic2_20)


def test_tail_dominates_omitted_terms(schottky_gens):
    table = gr.enumerate_words(schottky_gens, 5)
    deep = gr.enumerate_words(schottky_gens, 9)
    x = lc.random_quadric_points(np.random.default_rng(4), 1, nu_max=1.0)[0]
    for ell in (2, 3, 5):
        idx = SpectralIndex(ell)
        omitted = deep.lengths > 5
        pts = deep.inverse_points(x)[omitted]
        mass = math.fsum((pts[:, 0] ** 2 + pts[:, 1] ** 2) ** (-ell / 2))
        assert mass <= math.exp(se.tail_at(ell, table, x))


def test_parity_cancellation(rng):
    gens = gr.make_cyclic(2.0).with_antipode()
    table = gr.enumerate_words(gens, 10)
    xs = lc.random_quadric_points(rng, 100, nu_max=3)
    for ell in (3, 5):
        for x in xs:
            assert abs(se.poincare_eval(SpectralIndex(ell), table, x).value) <= 1e-12
    rep = se.spectrum_certified(table, pr.growth_fit(table, r=2.0), ell_max=9)
    labels = {r.ell: r.verdict_label for r in rep.rows}
    assert labels[3] == labels[5] == "parity_excluded"
    assert labels[4] == "certified" and rep.antipodal
    assert rep.rows[2].certificate.identity_mass == 2


def test_even_certificates_unaffected_by_antipode(schottky_gens, schottky8):
    plain = se.spectrum_certified(schottky8, ell_max=12)
    both = gr.enumerate_words(schottky_gens.with_antipode(), 8)
    anti = se.spectrum_certified(both, ell_max=12)
    for a, b in zip(plain.rows, anti.rows):
        if a.ell % 2 == 0:
            assert a.certified == b.certified


def test_evaluation_is_deterministic(schottky_gens):
    a = gr.enumerate_words(schottky_gens, 6)
    b = gr.enumerate_words(schottky_gens, 6, workers=3)
    x = lc.random_quadric_points(np.random.default_rng(9), 1, nu_max=1.0)[0]
    va = se.poincare_eval(SpectralIndex(4), a, x)
    vb = se.poincare_eval(SpectralIndex(4), b, x)
    assert va.value == vb.value
    # fsum does not care about order
    lm, ph, sg = se._terms(SpectralIndex(4), a.inverse_points(x))
    perm = np.random.default_rng(1).permutation(lm.size)
    assert se._fsum_complex(lm[perm], ph[perm], sg[perm], va.log_scale) == va.scaled


def test_near_fixer_and_origin_shift():
    T, theta = 2.0, 0.7
    gam = GroupElement(lc.rotation(theta) @ lc.diag_a(T), lc.diag_a(T))
    gens = gr.GeneratorSet("cyclic", (gam,))
    table = gr.enumerate_words(gens, 6)
    assert np.allclose(table.points()[1], lc.matrix_to_quadric(lc.rotation(theta)), atol=1e-12)
    with pytest.raises(NearFixer):
        se.orbit_at_origin(table)
    res = se.origin_shift_search(table, 64, np.random.default_rng(0))
    assert res.r_min_identity < 1e-9 and res.positive
    shifted = gr.enumerate_words(gr.conjugate(gens, res.g), 6)
    se.orbit_at_origin(shifted)
    assert se.shifted_r_min(table, res.g) == pytest.approx(res.r_min)


def test_origin_shift_keeps_identity_when_fine(schottky8):
    res = se.origin_shift_search(schottky8)
    assert res.trials == 1 and res.g.allclose(GroupElement.identity())


def test_invariance_and_conjugation(schottky_gens, rng):
    table = gr.enumerate_words(schottky_gens, 7)
    xs = lc.random_quadric_points(rng, 3, nu_max=1.0)
    rows = [1, 2, 5]
    res = se.invariance_residual(SpectralIndex(3), table, rows, xs)
    assert res.ok
    g = GroupElement(lc.random_sl2(rng, mu_max=0.5), lc.random_sl2(rng, mu_max=0.5))
    assert se.conjugation_equivariance(SpectralIndex(3), table, g, xs) <= 1e-10


def test_eigen_residual():
    table = gr.enumerate_words(gr.make_cyclic(2.0), 25)
    xs = lc.random_quadric_points(np.random.default_rng(2), 5, nu_max=1.0)
    assert se.eigen_residual(SpectralIndex(5), table, xs) < 1e-6
    assert se.eigen_residual(SpectralIndex(2), table, xs) < 1e-6
    with pytest.raises(TailTooLarge):
        se.eigen_residual(SpectralIndex(2), gr.enumerate_words(gr.make_cyclic(2.0), 3), xs)
