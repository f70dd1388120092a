"""Command-line driver.

    poincare-ads <command> --config run.ini [--out DIR] [--depth N] [--seed K] [--threads W]

Commands: sharpness, count, spectrum, deform, laplacian, series-eval.  Each
run writes its CSV files and a ``manifest.json`` into the output directory.

Configuration is an INI file.  Every key is optional and listed in
:data:`SCHEMA`; unknown sections or keys are errors.  Example::

    [group]
    kind = schottky
    k = 2
    T = 6
    angles = 0, 0.7853981633974483

    [run]
    depth = 12
    seed = 1

    [spectrum]
    ell_max = 30

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__
from . import groups as gr
from . import lie_core as lc
from . import properness as pr
from . import series as se
from . import spectra as sp
from .errors import ConfigError, NumericalError
from .groups import fmt

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


# ---------------------------------------------------------------------------
# Configuration


def _floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").replace(",", " ").split()]
    return tuple(float(p) for p in parts)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return t
    return parse


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "group": {
        "kind": (_choice("trivial", "cyclic", "schottky"), "trivial"),
        "antipodal": (_bool, False),
        "T": (float, 2.0),
        "side": (_choice("left", "right", "both"), "left"),
        "T_right": (float, None),
        "k": (int, 2),
        "angles": (_floats, None),
        "rho": (_choice("trivial", "same", "rotation", "shear"), "trivial"),
        "rho_t": (float, 0.0),
        "rho_params": (_floats, None),
    },
    "run": {
        "depth": (int, 8),
        "seed": (int, 0),
        "threads": (int, 1),
        "memory_budget": (int, gr.DEFAULT_MEMORY_BUDGET),
        "shell_width": (float, None),
        "shift_trials": (int, 64),
    },
    "spectrum": {
        "ell_min": (int, 2),
        "ell_max": (int, 20),
        "sign": (int, 1),
    },
    "sharpness": {
        "floor": (float, pr.DEFAULT_FLOOR),
        "margin": (float, pr.DEFAULT_MARGIN),
        "min_depth": (int, 1),
    },
    "count": {
        "radii": (_floats, None),
        "r_start": (float, 0.5),
        "r_step": (float, 1.0),
        "r_count": (int, 20),
    },
    "deform": {
        "mode": (_choice("rotation", "shear"), "rotation"),
        "params": (_floats, None),
        "t_start": (float, 0.0),
        "t_stop": (float, math.pi / 4),
        "t_steps": (int, 9),
        "c_prime_window": (float, 1.0),
    },
    "laplacian": {
        "model": (_choice("ads", "su22"), "ads"),
        "m": (int, 2),
        "ell_min": (int, 2),
        "ell_max": (int, 8),
        "samples": (int, 100),
        "nu_max": (float, 3.0),
        "h": (float, sp.DEFAULT_H),
        "scheme": (_choice(*sorted(sp.STENCILS)), "central4"),
        "tolerance": (float, 1e-4),
        "abs_tolerance": (float, 1e-6),
    },
    "series": {
        "ell": (int, 3),
        "sign": (int, 1),
        "points": (int, 10),
        "nu_max": (float, 2.0),
        "include_origin": (_bool, True),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict[str, dict[str, Any]]
    source: dict[str, dict[str, str]]

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def echo(self) -> dict[str, dict[str, Any]]:
        def plain(v):
            return list(v) if isinstance(v, tuple) else v
        return {s: {k: plain(v) for k, v in kv.items()} for s, kv in self.values.items()}


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable configuration: {exc}") from exc
    values: dict[str, dict[str, Any]] = {}
    source: dict[str, dict[str, str]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    for section, keys in SCHEMA.items():
        values[section], source[section] = {}, {}
        for key, (parse, default) in keys.items():
            if cp.has_option(section, key):
                raw = cp.get(section, key)
                try:
                    values[section][key] = parse(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
                source[section][key] = raw
            else:
                values[section][key] = default
    cfg = ExperimentConfig(values, source)
    validate(cfg)
    return cfg


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return parse_config("")
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path!r}: {exc}") from exc


def _positive(cfg, section, key, strict=True):
    v = cfg[section][key]
    if v is not None and not (v > 0 if strict else v >= 0):
        raise ConfigError(f"[{section}] {key} must be {'positive' if strict else 'non-negative'}")


def validate(cfg: ExperimentConfig) -> None:
    g, run = cfg["group"], cfg["run"]
    _positive(cfg, "group", "T")
    _positive(cfg, "group", "T_right")
    if run["depth"] < 0:
        raise ConfigError("[run] depth must be >= 0")
    if run["threads"] < 1:
        raise ConfigError("[run] threads must be >= 1")
    _positive(cfg, "run", "shell_width")
    _positive(cfg, "run", "shift_trials")
    if g["kind"] == "schottky":
        if g["k"] < 2:
            raise ConfigError("[group] k must be >= 2 for a Schottky group")
        if g["angles"] is not None and len(g["angles"]) != g["k"]:
            raise ConfigError("[group] angles needs exactly k entries")
        if g["rho"] in ("rotation", "shear"):
            _deform_params(g["rho"], g["rho_params"], g["k"], "group", "rho_params")
    elif g["rho"] != "trivial":
        raise ConfigError("[group] rho applies to kind = schottky only")
    band = cfg["spectrum"]
    if not 2 <= band["ell_min"] <= band["ell_max"]:
        raise ConfigError("[spectrum] need 2 <= ell_min <= ell_max")
    for sec in ("spectrum", "series"):
        if cfg[sec]["sign"] not in (1, -1):
            raise ConfigError(f"[{sec}] sign must be 1 or -1")
    _positive(cfg, "sharpness", "floor", strict=False)
    lap = cfg["laplacian"]
    if lap["model"] == "ads" and lap["m"] < 1:
        raise ConfigError("[laplacian] m must be >= 1")
    if lap["ell_min"] > lap["ell_max"] or lap["ell_min"] < (1 if lap["model"] == "su22" else 0):
        raise ConfigError("[laplacian] bad ell range")
    for key in ("samples", "h", "nu_max", "tolerance", "abs_tolerance"):
        _positive(cfg, "laplacian", key)
    cnt = cfg["count"]
    if cnt["radii"] is not None and any(r <= 0 for r in cnt["radii"]):
        raise ConfigError("[count] radii must be positive")
    _positive(cfg, "count", "r_start")
    _positive(cfg, "count", "r_step")
    _positive(cfg, "count", "r_count")
    d = cfg["deform"]
    if d["t_steps"] < 1:
        raise ConfigError("[deform] t_steps must be >= 1")
    if d["params"] is not None:
        _deform_params(d["mode"], d["params"], g["k"], "deform", "params")
    if cfg["series"]["ell"] < 2:
        raise ConfigError("[series] ell must be >= 2")
    _positive(cfg, "series", "points", strict=False)


def _deform_params(mode: str, params, k: int, section: str, key: str):
    if params is None:
        raise ConfigError(f"[{section}] {key} is required for {mode}")
    if mode == "rotation":
        if len(params) != k:
            raise ConfigError(f"[{section}] {key}: rotation needs k angles")
        return list(params)
    if len(params) != 4 * k:
        raise ConfigError(f"[{section}] {key}: shear needs k traceless 2x2 matrices (4k numbers)")
    mats = np.asarray(params, dtype=float).reshape(k, 2, 2)
    if np.any(np.abs(mats[:, 0, 0] + mats[:, 1, 1]) > 1e-12):
        raise ConfigError(f"[{section}] {key}: shear matrices must be traceless")
    return list(mats)


# ---------------------------------------------------------------------------
# Group construction


def _angles(g) -> list[float]:
    if g["angles"] is not None:
        return list(g["angles"])
    return [i * math.pi / (2 * g["k"]) for i in range(g["k"])]


def build_group(cfg: ExperimentConfig) -> gr.GeneratorSet:
    g = cfg["group"]
    try:
        if g["kind"] == "trivial":
            return gr.make_trivial(g["antipodal"])
        if g["kind"] == "cyclic":
            gens = gr.make_cyclic(g["T"], g["side"], g["T_right"])
        else:
            gens = schottky_base(cfg)
            if g["rho"] == "same":
                gens = gr.make_pair(gr.j_images(gens), gr.j_images(gens), verify=False)
            elif g["rho"] in ("rotation", "shear"):
                params = _deform_params(g["rho"], g["rho_params"], g["k"], "group", "rho_params")
                gens = gr.deform(gens, g["rho_t"], g["rho"], params)
    except ValueError as exc:
        raise ConfigError(f"[group] {exc}") from exc
    return gens.with_antipode(g["antipodal"])


def schottky_base(cfg: ExperimentConfig) -> gr.GeneratorSet:
    g = cfg["group"]
    return gr.make_schottky(g["k"], g["T"], _angles(g))


def enumerate_group(cfg: ExperimentConfig, gens: gr.GeneratorSet, depth: int | None = None) -> gr.OrbitTable:
    run = cfg["run"]
    depth = run["depth"] if depth is None else depth
    return gr.enumerate_words(gens, depth, workers=run["threads"],
                              memory_budget=run["memory_budget"])


# ---------------------------------------------------------------------------
# Output


class RunContext:
    def __init__(self, command: str, cfg: ExperimentConfig, out: str):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.started = time.perf_counter()
        self.files: list[str] = []
        self.calibration: dict[str, float] = {}
        self.caveats: list[str] = []
        self.results: dict[str, Any] = {}
        os.makedirs(out, exist_ok=True)

    def write_csv(self, name: str, header, rows) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
        return self.write_text(name, buf.getvalue())

    def write_text(self, name: str, text: str) -> str:
        path = os.path.join(self.out, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.files.append(name)
        return path

    def manifest(self, status: str, error: str | None = None) -> None:
        data = {
            "command": self.command,
            "version": __version__,
            "status": status,
            "error": error,
            "config": self.cfg.echo(),
            "wall_clock_seconds": round(time.perf_counter() - self.started, 3),
            "calibration": self.calibration,
            "caveats": self.caveats,
            "results": self.results,
            "files": self.files,
        }
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if v is None:
        return ""
    return v


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


# ---------------------------------------------------------------------------
# Commands


def cmd_sharpness(ctx: RunContext) -> None:
    cfg = ctx.cfg
    sh = cfg["sharpness"]
    table = enumerate_group(cfg, build_group(cfg))
    rows = []
    for d in range(max(1, sh["min_depth"]), table.depth + 1):
        est = pr.sharpness_fit(table.truncate(d), sh["floor"], sh["margin"])
        clip = pr.clip_lower_bound(table.truncate(d), sh["floor"])
        rows.append((d, est.c_prime, est.C_prime, est.c, est.C, clip, est.admissible, est.n_fit))
    ctx.write_csv("sharpness.csv", ("depth", "c_prime", "C_prime", "c", "C", "clip_lower",
                                    "admissible", "n_fit"), rows)
    if rows:
        last = rows[-1]
        ctx.write_csv("fit.csv", FIT_HEADER,
                      [(q, v, table.depth, True) for q, v in zip(
                          ("c_prime", "C_prime", "c", "C", "clip_lower"), last[1:6])])
    if rows:
        ctx.results.update(c=rows[-1][3], c_prime=rows[-1][1], admissible=rows[-1][6])
    ctx.caveats.append("sharpness constants are empirical fits over the enumerated words")


FIT_HEADER = ("quantity", "value", "depth", "complete")


def growth_fit_rows(fit: pr.GrowthFit) -> list[tuple]:
    complete = fit.n_complete >= 1
    return [(q, v, fit.depth, complete) for q, v in (
        ("r", fit.r), ("S", fit.S), ("U", fit.U), ("r_min", fit.r_min),
        ("floor_a", fit.floor.a), ("floor_b", fit.floor.b), ("nu_floor", fit.nu_floor),
        ("n_complete", fit.n_complete))]


def _radii(cfg) -> list[float]:
    c = cfg["count"]
    if c["radii"] is not None:
        return list(c["radii"])
    return [c["r_start"] + i * c["r_step"] for i in range(c["r_count"])]


def cmd_count(ctx: RunContext) -> None:
    cfg = ctx.cfg
    table = enumerate_group(cfg, build_group(cfg))
    floor = pr.linear_floor(table)
    x0 = lc.basepoint(2)
    rows = [(R, *pr.count_pseudoball(table, x0, R, floor)) for R in _radii(cfg)]
    ctx.write_csv("count.csv", ("R", "count", "complete"), rows)
    summary = []
    if table.gens.rank > 0 and table.depth >= 6:
        ce = pr.critical_exponent(table)
        c = pr.sharpness_fit(table).c
        bound = ce.delta_hat / c if c > 0 else math.inf
        slope = pr.count_growth_slope(table)
        summary.append((slope, ce.delta_hat, c, bound, slope <= bound + 0.1))
        ctx.results.update(slope=slope, delta_hat=ce.delta_hat, bound=bound)
    if table.gens.rank > 0:
        ctx.write_csv("fit.csv", FIT_HEADER, growth_fit_rows(pr.growth_fit(table)))
    ctx.write_csv("count_summary.csv", ("slope", "delta_hat", "c", "delta_hat_over_c",
                                        "within_bound"), summary)
    if any(not r[2] for r in rows):
        ctx.caveats.append("some pseudo-ball counts are not certified complete at this depth")


def _shifted_group(ctx: RunContext, gens: gr.GeneratorSet, table: gr.OrbitTable):
    """Conjugate Gamma when some element moves x0 into the compact orbit."""
    if gens.rank == 0 or se.shifted_r_min(table, lc.GroupElement.identity()) > se.FIXER_TOL:
        return gens, table
    rng = np.random.default_rng(ctx.cfg["run"]["seed"])
    res = se.origin_shift_search(table, ctx.cfg["run"]["shift_trials"], rng)
    ctx.results["origin_shift"] = {"r_min": res.r_min, "positive": res.positive,
                                   "g1": res.g.g1, "g2": res.g.g2}
    if not res.positive:
        ctx.caveats.append("origin shift search found no conjugate avoiding the compact orbit")
        return gens, table
    shifted = gr.conjugate(gens, res.g)
    return shifted, enumerate_group(ctx.cfg, shifted, table.depth)


def spectrum_for(ctx: RunContext, gens: gr.GeneratorSet, depth: int | None = None):
    cfg = ctx.cfg
    table = enumerate_group(cfg, gens, depth)
    gens, table = _shifted_group(ctx, gens, table)
    fit = pr.growth_fit(table, r=cfg["run"]["shell_width"])
    s = cfg["spectrum"]
    rep = se.spectrum_certified(table, fit, 2, s["ell_max"], s["ell_min"], s["sign"])
    return table, fit, rep


def cmd_spectrum(ctx: RunContext) -> None:
    table, fit, rep = spectrum_for(ctx, build_group(ctx.cfg))
    ctx.write_text("spectrum.csv", rep.csv_text())
    ctx.write_csv("growth.csv", ("shell", "count", "envelope", "complete"),
                  [(n, c, float(fit.envelope(n)), n < fit.n_complete)
                   for n, c in enumerate(fit.shell_counts)])
    ctx.write_csv("fit.csv", FIT_HEADER, growth_fit_rows(fit))
    ctx.results.update(ell0=rep.ell0, clip_lower=rep.clip_lower, trend=rep.trend,
                       closed_threshold=rep.closed_threshold, S=fit.S, U=fit.U, r=fit.r,
                       r_min=fit.r_min, floor_a=fit.floor.a, floor_b=fit.floor.b,
                       antipodal=rep.antipodal)
    ctx.caveats.extend(rep.caveats)


def cmd_deform(ctx: RunContext) -> None:
    cfg = ctx.cfg
    d, g = cfg["deform"], cfg["group"]
    if g["kind"] != "schottky":
        raise ConfigError("deform needs [group] kind = schottky")
    try:
        params = _deform_params(d["mode"], d["params"], g["k"], "deform", "params")
        base = schottky_base(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n = d["t_steps"]
    ts = [d["t_start"]] if n == 1 else list(np.linspace(d["t_start"], d["t_stop"], n))
    header = ("t", "c_prime", "c", "clip_lower", "r_min", "ell0")
    rows, certified_sets = [], []
    failure = None
    for t in ts:
        gens = gr.deform(base, float(t), d["mode"], params).with_antipode(g["antipodal"])
        table = enumerate_group(cfg, gens)
        est = pr.sharpness_fit(table, cfg["sharpness"]["floor"], cfg["sharpness"]["margin"])
        if est.c_prime > d["c_prime_window"]:
            ctx.results["window_end"] = float(t)
            break
        if not est.admissible:
            failure = f"deformation inadmissible at t = {float(t)!r} (c' = {est.c_prime:.6g})"
            break
        _, fit, rep = spectrum_for(ctx, gens)
        rows.append((float(t), est.c_prime, est.c, rep.clip_lower, fit.r_min, rep.ell0))
        certified_sets.append(set(rep.certified_ells))
    ctx.write_csv("deform.csv", header, rows)
    ell0s = [r[5] for r in rows]
    if rows and all(e is not None for e in ell0s):
        top = max(ell0s)
        common = set.intersection(*certified_sets) & set(range(top, ell0s[0] + 21))
        ctx.results.update(ell0_at_0=ell0s[0], ell0_max=top, ell0_drift=top - ell0s[0],
                           common_certified=sorted(common))
    if failure:
        raise NumericalError(failure)


def cmd_laplacian(ctx: RunContext) -> None:
    lap = ctx.cfg["laplacian"]
    rng = np.random.default_rng(ctx.cfg["run"]["seed"])
    model, m = lap["model"], lap["m"]
    cal = sp.calibrate_full(model, m if model == "ads" else 2, None, lap["h"], lap["scheme"])
    ctx.calibration = {"model": model, "m": m, "s": cal.config.s, "probe_ell": cal.probe_ell,
                       "h": lap["h"], "scheme": lap["scheme"]}
    if model == "ads":
        pts = lc.random_quadric_points(rng, lap["samples"], m=m, nu_max=lap["nu_max"])
    else:
        pts = sp.random_su22_points(rng, lap["samples"])
    rows, ok = [], True
    for ell in range(lap["ell_min"], lap["ell_max"] + 1):
        if model == "ads":
            lam = sp.eigenvalue_ads(m, ell)
            res = np.concatenate([sp.eigen_check(sp.SpectralIndex(ell, s, m), pts, cal.config)
                                  for s in (1, -1)])
        else:
            lam = sp.eigenvalue_su22(ell)
            res = sp.eigen_check_su22(ell, pts, cal.config)
        kind = "absolute" if lam == 0 else "relative"
        tol = lap["abs_tolerance"] if lam == 0 else lap["tolerance"]
        passed = bool(np.max(res) <= tol)
        ok = ok and passed
        rows.append((ell, lam, kind, float(np.max(res)), float(np.median(res)), passed))
    ctx.write_csv("laplacian.csv", ("ell", "eigenvalue", "residual_kind", "max_residual",
                                    "median_residual", "pass"), rows)
    ctx.results["all_pass"] = ok


def cmd_series_eval(ctx: RunContext) -> None:
    cfg = ctx.cfg
    s = cfg["series"]
    table = enumerate_group(cfg, build_group(cfg))
    rng = np.random.default_rng(cfg["run"]["seed"])
    pts = lc.random_quadric_points(rng, s["points"], 2, s["nu_max"])
    if s["include_origin"]:
        pts = np.vstack([lc.basepoint(2), pts])
    idx = sp.SpectralIndex(s["ell"], s["sign"], 2)
    rows = []
    for i, x in enumerate(pts):
        v = se.poincare_eval(idx, table, x)
        z = v.value
        rows.append((i, *[float(c) for c in x], z.real, z.imag, abs(z), v.tail, v.terms_used))
    ctx.write_csv("series.csv", ("point", "x1", "x2", "x3", "x4", "re", "im", "abs",
                                 "tail_bound", "terms"), rows)


COMMANDS = {
    "sharpness": cmd_sharpness,
    "count": cmd_count,
    "spectrum": cmd_spectrum,
    "deform": cmd_deform,
    "laplacian": cmd_laplacian,
    "series-eval": cmd_series_eval,
}


# ---------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="poincare-ads",
                                description="Poincare series and spectra on AdS^3 quotients.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--depth", type=int, help="override [run] depth")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--threads", type=int, help="override [run] threads (speed only)")
    return p


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    run = dict(cfg["run"])
    for key in ("depth", "seed", "threads"):
        v = getattr(args, key)
        if v is not None:
            run[key] = v
    values = dict(cfg.values)
    values["run"] = run
    out = ExperimentConfig(values, cfg.source)
    validate(out)
    return out


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ctx = RunContext(args.command, cfg, args.out)
    try:
        COMMANDS[args.command](ctx)
    except ConfigError as exc:
        ctx.manifest("config_error", str(exc))
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        ctx.manifest("numerical_failure", str(exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    ctx.manifest("ok")
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))
