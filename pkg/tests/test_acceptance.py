"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import csv
import functools
import json
import math
import os
import time

import numpy as np
import pytest

import oracles
from poincare_ads import groups as gr
from poincare_ads import harness as hn
from poincare_ads import lie_core as lc
from poincare_ads import properness as pr
from poincare_ads import series as se
from poincare_ads import spectra as sp
from poincare_ads.lie_core import GroupElement
from poincare_ads.spectra import SpectralIndex

CONFIGS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")
SQRT2_2 = math.sqrt(2) / 2


class Clock:
    def __init__(self):
        self.t0 = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.t0


def report(capsys, n, title, checks, elapsed, limit):
    """Print one line for the criterion and fail with the first broken check."""
    checks = dict(checks)
    checks[f"runtime {elapsed:.2f}s < {limit}s"] = elapsed < limit
    ok = all(checks.values())
    broken = [k for k, v in checks.items() if not v]
    with capsys.disabled():
        detail = "; ".join(broken) if broken else f"{len(checks)} checks, {elapsed:.2f}s"
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}")
    assert ok, broken


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_c01_eigenvalues_ads3(capsys):
    clock = Clock()
    cfg = sp.calibrate_full("ads", 2, h=1e-3).config
    x = lc.random_quadric_points(np.random.default_rng(101), 100, nu_max=3)
    checks = {}
    for ell in range(2, 9):
        for s in (1, -1):
            res = float(np.max(sp.eigen_check(SpectralIndex(ell, s), x, cfg)))
            tol = 1e-6 if ell == 2 else 1e-4
            checks[f"ell={ell} sign={s} residual {res:.2e} <= {tol:g}"] = res <= tol
    report(capsys, 1, "eigenvalue reproduction on AdS^3", checks, clock.elapsed, 5)


def test_c02_eigenvalues_su22(capsys):
    clock = Clock()
    cfg = sp.calibrate_full("su22", h=1e-3).config
    z = sp.random_su22_points(np.random.default_rng(102), 100, (0.5, 2.0))
    checks = {"P_ell(1, 0) = 1": all(sp.P_ell(l, 1.0, 0.0) == 1.0 for l in range(1, 6))}
    for ell in range(1, 6):
        res = float(np.max(sp.eigen_check_su22(ell, z, cfg)))
        tol = 1e-6 if sp.eigenvalue_su22(ell) == 0 else 1e-4
        checks[f"ell={ell} residual {res:.2e} <= {tol:g}"] = res <= tol
    report(capsys, 2, "SU(2,2) eigenvalue", checks, clock.elapsed, 5)


def test_c03_eigenvalues_higher_rank(capsys):
    clock = Clock()
    cfg = sp.calibrate_full("ads", 4, h=1e-3).config
    x = lc.random_quadric_points(np.random.default_rng(103), 100, m=4, nu_max=3)
    checks = {}
    for ell in range(4, 9):
        res = float(np.max(np.concatenate(
            [sp.eigen_check(SpectralIndex(ell, s, 4), x, cfg) for s in (1, -1)])))
        checks[f"ell={ell} residual {res:.2e} <= 1e-4"] = res <= 1e-4
    report(capsys, 3, "AdS^5 eigenvalues ell(ell - m)", checks, clock.elapsed, 5)


def test_c04_decay_bounds(capsys):
    clock = Clock()
    x = lc.random_quadric_points(np.random.default_rng(104), 100_000, nu_max=10)
    nu = lc.nu_point(x)
    checks = {}
    for ell in range(2, 11):
        absval = sp.psi_ads_abs(ell, x)
        loose, tight = sp.decay_bounds(ell, nu)
        law = float(np.max(np.abs(absval - np.cosh(nu / 2) ** -ell)))
        checks[f"ell={ell} loose"] = bool(np.all(absval <= np.exp(loose) + 1e-12))
        checks[f"ell={ell} tight"] = bool(np.all(absval <= np.exp(tight) + 1e-12))
        checks[f"ell={ell} magnitude law {law:.1e}"] = law <= 1e-10
    report(capsys, 4, "decay bounds and magnitude law", checks, clock.elapsed, 10)


def test_c05_cartan_suite(capsys):
    clock = Clock()
    rng = np.random.default_rng(105)
    N = 10_000
    g, h = lc.random_sl2(rng, N, 4.0), lc.random_sl2(rng, N, 4.0)
    a, b, ab = lc.mu2(g), lc.mu2(h), lc.mu2(g @ h)
    x = lc.random_quadric_points(rng, N, nu_max=6)
    nu_elem = lc.mu2(g @ lc.sl2_inv(h))
    drift = np.abs(lc.nu_point(lc.act_arrays(g, h, x)) - lc.nu_point(x))
    al, be = rng.uniform(0, 2 * np.pi, N), rng.uniform(0, 2 * np.pi, N)
    checks = {
        "subadditivity": bool(np.all(ab <= a + b + 1e-10)),
        "sharpened triangle": bool(np.all(np.abs(ab - a) <= b + 1e-10)
                                   and np.all(np.abs(ab - b) <= a + 1e-10)),
        "polar sandwich": bool(np.all(np.abs(a - b) <= nu_elem + 1e-10)
                               and np.all(nu_elem <= a + b + 1e-10)),
        "drift bound": bool(np.all(drift <= a + b + 1e-10)),
        "bi-rotation invariance": bool(
            np.max(np.abs(lc.mu2(lc.rotation(al) @ g @ lc.rotation(be)) - a)) <= 1e-10),
        "two-formula agreement": bool(
            np.max(np.abs(lc.nu_point(x) - lc.mu2(lc.quadric_to_matrix(x)))) <= 1e-10),
        "quadric preserved": bool(
            np.max(np.abs(lc.quadric_form(lc.act_arrays(g, h, x)) - 1)) <= 1e-9),
    }
    report(capsys, 5, "Cartan projection inequalities", checks, clock.elapsed, 5)


def test_c06_counting_oracle(capsys):
    clock = Clock()
    checks = {}
    cyc = gr.enumerate_words(gr.make_cyclic(1.0), 30)
    nus = oracles.cyclic_nu_values(1.0, 100)
    for R in np.arange(0.5, 20.0, 1.0):
        count, complete = pr.count_pseudoball(cyc, lc.basepoint(), float(R))
        checks[f"cyclic R={R}"] = complete and count == oracles.brute_count(nus, R)
    gens = gr.make_schottky(2, 6.0, [0.0, math.pi / 4])
    table = gr.enumerate_words(gens, 10)
    ogens = oracles.schottky_gens(6.0, [0.0, math.pi / 4])
    ref = sorted(oracles.mu_svd(oracles.word_matrix(w, ogens)) for w in oracles.reduced_words(2, 10))
    checks["schottky table size"] = len(table) == len(ref)
    for R in (5.0, 15.0, 30.0, 45.0, 60.0):
        checks[f"schottky R={R}"] = pr.count_pseudoball(table, None, R)[0] == oracles.brute_count(ref, R)
    report(capsys, 6, "counting oracle equivalence", checks, clock.elapsed, 30)


def test_c07_cyclic_certificate(capsys):
    clock = Clock()
    table = gr.enumerate_words(gr.make_cyclic(2.0), 20)
    deeper = gr.enumerate_words(gr.make_cyclic(2.0), 24)
    fit = pr.growth_fit(table, r=2.0)
    rep = se.spectrum_certified(table, fit, ell_max=12)
    by_ell = {r.ell: r for r in rep.rows}
    checks = {"ell=2 not certified": not by_ell[2].certified,
              "ell=3 certified": by_ell[3].certified}
    for ell, row in by_ell.items():
        direct = abs(se.poincare_eval(SpectralIndex(ell), deeper).value)
        checks[f"soundness ell={ell}"] = row.certificate.margin <= direct + 1e-9
    d = se.ell_threshold_closed(1.0, math.log(2), 1.0)
    total = se.threshold_sum(1.0, math.log(2), 1.0, d)
    direct = oracles.cosh_sum(d, weight=lambda n: 2.0**n)
    checks[f"closed threshold d={d}"] = d == 4
    checks[f"verification sum {total:.6f} < 1"] = total < 1 and abs(total - direct) <= 1e-6
    report(capsys, 7, "nonvanishing certificate, cyclic T=2", checks, clock.elapsed, 10)


def test_c08_schottky_certification(capsys):
    clock = Clock()
    gens = gr.make_schottky(2, 6.0, [0.0, math.pi / 4])
    table = gr.enumerate_words(gens, 12)
    fit = pr.growth_fit(table)
    rep = se.spectrum_certified(table, fit, ell_max=30)
    est = pr.sharpness_fit(table)
    ell0 = rep.ell0
    window = set(range(ell0, ell0 + 21)) if ell0 is not None else {None}
    checks = {
        f"finite ell0 = {ell0}": ell0 is not None,
        "[ell0, ell0 + 20] certified": window <= set(rep.certified_ells),
        f"c = {est.c!r}": abs(est.c - SQRT2_2) <= 1e-8,
    }
    report(capsys, 8, "Schottky k=2 T=6 certification at depth 12", checks, clock.elapsed, 120)


def test_c09_parity(capsys):
    clock = Clock()
    base = gr.make_schottky(2, 6.0, [0.0, math.pi / 4])
    anti = gr.enumerate_words(base.with_antipode(), 7)
    plain = gr.enumerate_words(base, 7)
    xs = lc.random_quadric_points(np.random.default_rng(109), 100, nu_max=3)
    checks = {"antipode detected": gr.detect_antipode(anti)}
    for ell in (3, 5, 7):
        worst = max(abs(se.poincare_eval(SpectralIndex(ell), anti, x).value) for x in xs)
        checks[f"ell={ell} max |phi_N| {worst:.1e} <= 1e-12"] = worst <= 1e-12
    ra = se.spectrum_certified(anti, ell_max=16)
    rp = se.spectrum_certified(plain, ell_max=16)
    for a, p in zip(ra.rows, rp.rows):
        if a.ell % 2 == 0:
            checks[f"even ell={a.ell} unaffected"] = a.certified == p.certified
        else:
            checks[f"odd ell={a.ell} excluded"] = a.verdict_label == "parity_excluded"
    report(capsys, 9, "parity with the antipodal element", checks, clock.elapsed, 30)


def _deform(tmp_path, name):
    out = tmp_path / name
    code = hn.run(["deform", "--config", os.path.join(CONFIGS, f"{name}.ini"), "--out", str(out)])
    man = json.loads((out / "manifest.json").read_text())
    return code, man["results"], _csv(out / "deform.csv")


def test_c10_deformation_stability(capsys, tmp_path):
    clock = Clock()
    code, res, rows = _deform(tmp_path, "deform_rotation")
    ell0s = [r["ell0"] for r in rows]
    checks = {
        "rotation run ok": code == 0,
        "rotation sweep has 9 steps": len(rows) == 9,
        f"rotation ell0 constant {sorted(set(ell0s))}": len(set(ell0s)) == 1 and ell0s[0] != "",
    }
    code, res, rows = _deform(tmp_path, "deform_shear")
    cps = [float(r["c_prime"]) for r in rows]
    checks["shear run ok"] = code == 0
    checks["shear within c' <= 0.3"] = len(rows) > 1 and max(cps) <= 0.3
    checks[f"shear drift {res.get('ell0_drift')} <= 2"] = res.get("ell0_drift", 99) <= 2
    checks["common certified set nonempty"] = bool(res.get("common_certified"))
    report(capsys, 10, "deformation stability", checks, clock.elapsed, 600)


def test_c11_equivariance(capsys):
    clock = Clock()
    rng = np.random.default_rng(111)
    gens = gr.make_schottky(2, 6.0, [0.0, math.pi / 4])
    table = gr.enumerate_words(gens, 7)
    xs = lc.random_quadric_points(rng, 4, nu_max=1.0)
    g = GroupElement(lc.random_sl2(rng, mu_max=0.5), lc.random_sl2(rng, mu_max=0.5))
    checks = {}
    for name, t in (("schottky", table), ("cyclic", gr.enumerate_words(gr.make_cyclic(2.0), 20))):
        res = se.conjugation_equivariance(SpectralIndex(3), t, g, xs)
        checks[f"conjugation {name} {res:.1e} <= 1e-10"] = res <= 1e-10
    idx = SpectralIndex(4)
    worst = True
    for i in (1, 2, 3, 4, 6):
        gam = table.element(i)
        eff = table.depth - int(table.lengths[i])
        for x in xs:
            a = se.poincare_eval(idx, table, lc.act(gam, x)).value
            b = se.poincare_eval(idx, table, x).value
            bound = 2 * math.exp(se.tail_at(idx.ell, table, x, depth=eff)) + 1e-9
            worst = worst and abs(a - b) <= bound
    checks["gamma-invariance within 2 tail + 1e-9"] = worst
    cfg = sp.calibrate("ads", 2)
    y = lc.random_quadric_points(rng, 50, nu_max=2)
    gi = g.inverse()
    base = functools.partial(sp.psi_ads_value, SpectralIndex(5))
    lhs = sp.laplacian_fd(lambda p: base(lc.act(gi, p)), y, cfg)
    rhs = sp.laplacian_fd(base, lc.act(gi, y), cfg)
    rel = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    checks[f"Laplacian G-equivariance {rel:.1e} <= 1e-4"] = rel <= 1e-4
    report(capsys, 11, "equivariance identities", checks, clock.elapsed, 60)


PIPELINE = [("spectrum", "schottky.ini"), ("sharpness", "schottky.ini"), ("count", "cyclic.ini"),
            ("series-eval", "cyclic.ini"), ("spectrum", "antipodal.ini"),
            ("laplacian", "laplacian_su22.ini")]


def test_c12_determinism(capsys, tmp_path):
    clock = Clock()
    checks = {}
    for i, (cmd, cfg) in enumerate(PIPELINE):
        seen = []
        for j, threads in enumerate(("1", "1", "4")):
            out = tmp_path / f"{i}_{j}"
            code = hn.run([cmd, "--config", os.path.join(CONFIGS, cfg), "--out", str(out),
                           "--seed", "7", "--threads", threads])
            files = sorted(p.name for p in out.glob("*.csv"))
            seen.append((code, {f: (out / f).read_bytes() for f in files}))
        same = all(s == seen[0] for s in seen[1:]) and seen[0][0] == 0 and seen[0][1]
        checks[f"{cmd} {cfg}"] = bool(same)
    report(capsys, 12, "byte-identical CSVs across runs and workers", checks, clock.elapsed,
           math.inf)
