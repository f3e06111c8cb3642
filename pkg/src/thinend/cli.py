"""Experiment runner.

    thinend list [--json]
    thinend validate -c config.yaml
    thinend run -c config.yaml [--jobs N] [--out DIR]

Configs are YAML with four sections (geometry, physics, numerics, output) and an
``experiment`` key naming one experiment or a list of them. Exponents may be
written as fraction strings ("5/6"). See README.md for the full schema.

Exit codes: 0 all checks passed, 1 a numerical check failed, 2 invalid config.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

SCHEMA = 1
ENV_OUT = "THINEND_OUT"

DEFAULTS: dict[str, dict[str, Any]] = {
    "geometry": {
        "curve": {"kind": "sine", "rel_amplitude": 0.5, "length": 2.0, "freq": 1.0},
        "eps": [0.2, 0.1, 0.05, 0.025],
        "a": 1.0, "ell": "7/9", "m": "7/9", "c_gamma": 1.0,
    },
    "physics": {
        "k": 1.0, "q0": 2.0, "q": "2 + sin(x1 + x2)/2", "direction": [0.6, 0.8],
        "h1": "1", "h2": "1", "f": "exp(x1)*sin(2*x2)", "g": "cos(3*x1*x2) + x2**2",
        "contrast": 0.01, "radius": 0.3, "length": 1.0,
        "zeta": "6/7", "alpha1": "5/6", "alpha": None, "alpha2": None, "alpha3": "2",
        "beta": "-2/3", "zero_cauchy_order": 2,
    },
    "numerics": {
        "h_ratio": 8, "h_list": [0.25, 0.125, 0.0625], "grid": 128, "n_theta": 64,
        "seed": 42, "pairs": 10000, "samples": 200, "slack": 0.1,
        "tol": {"identity": 1e-6, "green": 1e-8, "green_order": 1.8, "colinearity": None,
                "born": 1e-3, "born_far_field": 1e-2, "rate": 0.05, "r2": 0.999,
                "holder_spread": 1.2, "visibility_spread": 3.0, "flat_slope": 0.1,
                "distinguishable": 1e-3},
    },
    "output": {"dir": "thinend-out"},
}


class ConfigError(Exception):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _fraction(v, name: str, errors: list[str]) -> Fraction | None:
    try:
        return Fraction(str(v)) if not isinstance(v, float) else Fraction(v).limit_denominator(10**6)
    except (ValueError, ZeroDivisionError):
        errors.append(f"{name}: cannot parse {v!r} as a number")
        return None


@dataclass
class ExperimentConfig:
    experiments: list[str]
    geometry: dict
    physics: dict
    numerics: dict
    output: dict
    source: str = "<dict>"
    raw: dict = field(default_factory=dict)

    @property
    def eps(self) -> list[float]:
        return sorted((float(e) for e in self.geometry["eps"]), reverse=True)

    @property
    def seed(self) -> int:
        return int(self.numerics["seed"])

    def tol(self, key: str):
        return self.numerics["tol"][key]

    def params(self):
        from .estimates import ExponentParams
        ph, ge = self.physics, self.geometry
        over = {k: Fraction(str(ph[k])) for k in ("zeta", "alpha1", "alpha2", "alpha3", "alpha", "beta")
                if ph.get(k) is not None}
        over["ell"] = Fraction(str(ge["ell"]))
        over["m"] = Fraction(str(ge["m"]))
        return ExponentParams.default(2, **over)

    def as_dict(self) -> dict:
        return {"experiments": self.experiments, "geometry": self.geometry, "physics": self.physics,
                "numerics": self.numerics, "output": self.output}


def parse_config(data: dict | str, source: str = "<dict>") -> ExperimentConfig:
    """Merge defaults, validate, and raise ConfigError listing every problem."""
    if isinstance(data, str):
        try:
            data = yaml.safe_load(data)
        except yaml.YAMLError as exc:
            raise ConfigError([f"yaml: {exc}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping"])
    errors: list[str] = []
    unknown = set(data) - {"experiment", "geometry", "physics", "numerics", "output"}
    errors += [f"unknown top-level key {k!r}" for k in sorted(unknown)]
    exp = data.get("experiment")
    if exp is None:
        errors.append("missing key 'experiment'")
        names: list[str] = []
    else:
        names = [exp] if isinstance(exp, str) else list(exp)
        errors += [f"unknown experiment {n!r}" for n in names if n not in EXPERIMENTS]
    merged = {}
    for sec in ("geometry", "physics", "numerics", "output"):
        over = data.get(sec) or {}
        if not isinstance(over, dict):
            errors.append(f"{sec}: must be a mapping")
            over = {}
        merged[sec] = _merge(DEFAULTS[sec], over)
    cfg = ExperimentConfig(names, merged["geometry"], merged["physics"], merged["numerics"],
                           merged["output"], source, data)
    errors += _validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return parse_config(text, str(path))


def _validate(cfg: ExperimentConfig) -> list[str]:
    from .estimates import check_constraints
    errors: list[str] = []
    eps = cfg.geometry.get("eps")
    if not isinstance(eps, list) or not eps:
        errors.append("geometry.eps: must be a nonempty list")
    else:
        for e in eps:
            if not isinstance(e, (int, float)) or not e > 0:
                errors.append(f"geometry.eps: {e!r} is not a positive number")
        if len(set(eps)) != len(eps):
            errors.append("geometry.eps: duplicate values")
    for key in ("ell", "m"):
        _fraction(cfg.geometry[key], f"geometry.{key}", errors)
    for key in ("zeta", "alpha1", "alpha2", "alpha3", "alpha", "beta"):
        if cfg.physics.get(key) is not None:
            _fraction(cfg.physics[key], f"physics.{key}", errors)
    kind = cfg.geometry["curve"].get("kind")
    if kind not in ("flat", "sine"):
        errors.append(f"geometry.curve.kind: {kind!r} not in ['flat', 'sine']")
    if not float(cfg.numerics["h_ratio"]) >= 4:
        errors.append("numerics.h_ratio: must be >= 4 (mesh size h = eps/h_ratio <= eps/4)")
    if int(cfg.numerics["n_theta"]) < 32:
        errors.append("numerics.n_theta: must be >= 32")
    if not float(cfg.physics["k"]) > 0:
        errors.append("physics.k: must be positive")
    for key in ("q", "h1", "h2", "f", "g"):
        expr = cfg.physics.get(key)
        if expr is not None:
            try:
                _sym(expr, 0.1)
            except Exception as exc:  # sympy raises a zoo of types
                errors.append(f"physics.{key}: {exc}")
    if errors:
        return errors
    sweep_needs = {"cauchy-smallness", "term-bounds", "boundedness"}
    if sweep_needs & set(cfg.experiments) and len(eps) < 4:
        errors.append("geometry.eps: sweep experiments need at least 4 values")
    try:
        p = cfg.params()
    except Exception as exc:
        return errors + [f"physics: {exc}"]
    checks = {"term-bounds": "corollary2", "identity-check": "corollary2",
              "coupled-identity": "theorem1", "cauchy-smallness": None}
    for name in cfg.experiments:
        kind_ = checks.get(name)
        if kind_:
            errors += [f"{name}: constraint violated: {c}" for c in check_constraints(p, kind_)]
        if name in checks and not 0 < p.alpha1 < 1:
            errors.append(f"{name}: physics.alpha1 must lie in (0, 1)")
    return errors


def _sym(expr, eps: float):
    import sympy as sp
    from .fields import X1, X2
    loc = {"x1": X1, "x2": X2, "eps": sp.Float(eps)}
    e = sp.sympify(str(expr), locals=loc)
    free = e.free_symbols - {X1, X2}
    if free:
        raise ValueError(f"unknown symbols {sorted(map(str, free))}")
    return e


def _field(expr, eps: float, name: str):
    from .fields import SymbolicField
    return SymbolicField(_sym(expr, eps), name=name)


# --------------------------------------------------------------------------
# shared builders
# --------------------------------------------------------------------------

def _curve(cfg: ExperimentConfig, eps: float):
    from .geometry import GraphCurve
    c = cfg.geometry["curve"]
    L = float(c.get("length", 2.0))
    if c["kind"] == "flat":
        return GraphCurve.flat(L)
    return GraphCurve.sine(float(c.get("rel_amplitude", 0.5)) * eps, L, float(c.get("freq", 1.0)))


def _setup(cfg: ExperimentConfig, eps: float):
    """End, subregion, shifted end, mesh and default CGO at s = eps^beta."""
    from .geometry import build_subregion, build_thin_end_2d, mesh_subregion
    from .identity import default_cgo
    end = build_thin_end_2d(_curve(cfg, eps), eps, float(cfg.geometry["c_gamma"]))
    p = cfg.params()
    sub = build_subregion(end, float(cfg.geometry["a"]), p.ell, p.m, p.alpha1, 2)
    mesh = mesh_subregion(sub, eps / float(cfg.numerics["h_ratio"]))
    cgo = default_cgo(sub, eps ** float(p.beta))
    return end, sub, sub.shifted_end(), mesh, cgo


def _check(name: str, ok: bool, value, limit, rel: str) -> dict:
    return {"check": name, "ok": bool(ok), "value": value, "limit": limit, "relation": rel}


# --------------------------------------------------------------------------
# experiments: point(cfg, eps) -> row; finish(cfg, rows) -> (summary, checks)
# --------------------------------------------------------------------------

def _exponents_point(cfg, eps):
    from .estimates import (TAU1_STATUS, tau_corollary2_2d, tau_corollary2_3d, tau_theorem1_2d,
                            tau_theorem1_3d)
    sets = [("tau_theorem1_2d", tau_theorem1_2d, "6/7", "5/6", "1/18"),
            ("tau_theorem1_3d", tau_theorem1_3d, "5/7", "39/40", "1/72"),
            ("tau_corollary2_2d", tau_corollary2_2d, "5/6", "5/6", "1/18"),
            ("tau_corollary2_3d", tau_corollary2_3d, "4/5", "4/5", "1/45")]
    rows = []
    for name, fn, a, b, want in sets:
        tau = fn(Fraction(a), Fraction(b))
        rows.append({"function": name, "arg1": a, "arg2": b, "tau": str(tau), "expected": want,
                     "tau_float": float(tau)})
    rows.append({"function": "tau1", "arg1": "", "arg2": "", "tau": TAU1_STATUS, "expected": "",
                 "tau_float": math.nan})
    return rows


def _exponents_finish(cfg, rows):
    checks = [_check(r["function"], r["tau"] == r["expected"], r["tau"], r["expected"], "==")
              for r in rows if r["expected"]]
    return {"values": {r["function"]: r["tau"] for r in rows}}, checks


def _assumption_g_point(cfg, eps):
    from .geometry import build_thin_end_2d, nearest_lateral_point
    curve = _curve(cfg, eps)
    end = build_thin_end_2d(curve, eps, float(cfg.geometry["c_gamma"]))
    rng = np.random.default_rng(cfg.seed)
    n = int(cfg.numerics["samples"])
    lo, hi = end.interval
    U = rng.random((n, 2))
    x1 = lo + (hi - lo) * (0.1 + 0.8 * U[:, 0])
    x2 = curve(x1) - eps * (1e-3 + (1 - 2e-3) * U[:, 1])
    res, dist = [], []
    for p in np.column_stack([x1, x2]):
        r = nearest_lateral_point(end, p)
        res.append(r.residual)
        dist.append(r.dist)
    return [{"eps": eps, "max_residual": max(res), "max_dist_over_eps": max(dist) / eps,
             "samples": n}]


def _assumption_g_finish(cfg, rows):
    flat = cfg.geometry["curve"]["kind"] == "flat"
    tol = cfg.tol("colinearity") or (1e-8 if flat else 1e-3)
    checks = []
    for r in rows:
        checks.append(_check(f"colinearity eps={r['eps']:g}", r["max_residual"] < tol,
                             r["max_residual"], tol, "<"))
        checks.append(_check(f"dist<=eps eps={r['eps']:g}", r["max_dist_over_eps"] <= 1 + 1e-12,
                             r["max_dist_over_eps"], 1.0, "<="))
    return {}, checks


def _green_point(cfg, eps):
    from .geometry import mesh_rectangle
    from .identity import green_residual
    f = _field(cfg.physics["f"], eps, "f")
    g = _field(cfg.physics["g"] or cfg.physics["f"], eps, "g")
    return [{"h": float(h), "residual": green_residual(f, g, mesh_rectangle(0, 1, 0, 1, float(h)))}
            for h in cfg.numerics["h_list"]]


def _green_finish(cfg, rows):
    finest = min(rows, key=lambda r: r["h"])["residual"]
    tol = cfg.tol("green")
    if finest <= tol:
        return {"order": None}, [_check("residual at finest h", True, finest, tol, "<=")]
    from .estimates import fit_decay_exponent
    fit = fit_decay_exponent([r["h"] for r in rows], [r["residual"] for r in rows], "green")
    lim = cfg.tol("green_order")
    return {"order": fit.tau_hat}, [_check("convergence order", fit.tau_hat >= lim, fit.tau_hat, lim, ">=")]


def _identity_point(cfg, eps):
    from .fields import coordinate
    from .identity import manufacture_triple, transmission_identity_residual
    end, sub, se, mesh, cgo = _setup(cfg, eps)
    ph = cfg.physics
    profile = 1 + 0.5 * coordinate(0) * coordinate(1) + coordinate(0) ** 2
    tri = manufacture_triple(se, eps, float(Fraction(str(ph["alpha1"]))), _field(ph["q"], eps, "q"),
                             float(ph["k"]), profile=profile, order=int(ph["zero_cauchy_order"]))
    b = transmission_identity_residual(tri, cgo, sub, mesh)
    b1 = transmission_identity_residual(tri, cgo, sub, mesh, mode="proposition1")
    row = {"eps": eps, "h": mesh.h, "s": cgo.s, "relative_residual": b.relative_residual,
           "reconstruction": b.reconstruction_residual / abs(b.terms["I5"]),
           "relative_residual_prop1": b1.relative_residual}
    row.update({f"abs_{k}": abs(v) for k, v in b.terms.items()})
    return [row]


def _identity_finish(cfg, rows):
    tol = cfg.tol("identity")
    checks = []
    for r in rows:
        for key in ("relative_residual", "reconstruction", "relative_residual_prop1"):
            checks.append(_check(f"{key} eps={r['eps']:g}", r[key] < tol, r[key], tol, "<"))
    return {}, checks


def _coupled_point(cfg, eps):
    from .fields import CoefficientSet, make_tbc_partner, plane_wave
    from .identity import coupled_identity_breakdown, lateral_smallness
    end, sub, se, mesh, cgo = _setup(cfg, eps)
    ph = cfg.physics
    v = plane_wave(float(ph["k"]), ph["direction"])
    h1, h2 = _field(ph["h1"], eps, "h1"), _field(ph["h2"], eps, "h2")
    u = make_tbc_partner(se, v, h1, h2)
    cs = CoefficientSet(h1, h2)
    b = coupled_identity_breakdown(u, v, cs, cgo, sub, mesh)
    ls = lateral_smallness(u, v, cs, mesh)
    row = {"eps": eps, "h": mesh.h, "s": cgo.s, "relative_residual": b.relative_residual}
    row.update({f"abs_{k}": abs(x) for k, x in b.terms.items()})
    row.update(ls)
    return [row]


def _coupled_finish(cfg, rows):
    tol = cfg.tol("identity")
    checks = [_check(f"relative_residual eps={r['eps']:g}", r["relative_residual"] < tol,
                     r["relative_residual"], tol, "<") for r in rows]
    summary = {}
    ws = [r["w_sup"] for r in rows]
    if len(rows) >= 3 and min(ws) > 0:
        from .estimates import fit_decay_exponent
        summary["w_sup_exponent"] = fit_decay_exponent([r["eps"] for r in rows], ws).tau_hat
    return summary, checks


def _cauchy_point(cfg, eps):
    from .fields import c1_alpha_estimate, make_zero_cauchy_family
    end, sub, se, mesh, cgo = _setup(cfg, eps)
    a1 = float(Fraction(str(cfg.physics["alpha1"])))
    w = make_zero_cauchy_family(se, eps, a1, order=int(cfg.physics["zero_cauchy_order"]))
    pts = mesh.nodes
    return [{"eps": eps, "w_sup": float(np.max(np.abs(w.value(pts)))),
             "grad_sup": float(np.max(np.linalg.norm(w.gradient(pts), axis=1))),
             "c1_alpha": c1_alpha_estimate(w, a1, int(cfg.numerics["pairs"]), cfg.seed, mesh)}]


def _cauchy_finish(cfg, rows):
    from .estimates import fit_decay_exponent
    a1 = float(Fraction(str(cfg.physics["alpha1"])))
    es = [r["eps"] for r in rows]
    fw = fit_decay_exponent(es, [r["w_sup"] for r in rows], "w_sup")
    fg = fit_decay_exponent(es, [r["grad_sup"] for r in rows], "grad_sup")
    hs = [r["c1_alpha"] for r in rows]
    spread = max(hs) / min(hs)
    slack, r2 = cfg.tol("rate"), cfg.tol("r2")
    checks = [_check("w_sup exponent", fw.tau_hat >= 1 + a1 - slack, fw.tau_hat, 1 + a1 - slack, ">="),
              _check("w_sup r2", fw.r2 >= r2, fw.r2, r2, ">="),
              _check("grad_sup exponent", fg.tau_hat >= a1 - slack, fg.tau_hat, a1 - slack, ">="),
              _check("grad_sup r2", fg.r2 >= r2, fg.r2, r2, ">="),
              _check("c1_alpha spread", spread <= cfg.tol("holder_spread"), spread,
                     cfg.tol("holder_spread"), "<=")]
    return {"w_sup_exponent": fw.tau_hat, "grad_sup_exponent": fg.tau_hat, "c1_alpha_spread": spread}, checks


def _term_point(cfg, eps):
    from .fields import make_zero_cauchy_family, plane_wave
    from .identity import lemma_terms
    end, sub, se, mesh, cgo = _setup(cfg, eps)
    ph = cfg.physics
    w = make_zero_cauchy_family(se, eps, float(Fraction(str(ph["alpha1"]))),
                                order=int(ph["zero_cauchy_order"]))
    v = plane_wave(float(ph["k"]), ph["direction"])
    b = lemma_terms(w, v, _field(ph["q"], eps, "q"), float(ph["k"]), cgo, sub, mesh)
    row = {"eps": eps, "s": cgo.s, "delta": b.delta, "d1": b.d[0], "d2": b.d[1]}
    row.update({f"re_{k}": v_.real for k, v_ in b.terms.items()})
    row.update({f"im_{k}": v_.imag for k, v_ in b.terms.items()})
    return [row]


def _term_finish(cfg, rows):
    from .identity import TermBreakdown, check_term_bounds
    bds = []
    for r in rows:
        terms = {k[3:]: complex(r[k], r["im_" + k[3:]]) for k in r if k.startswith("re_")}
        bds.append(TermBreakdown("corollary2", terms, 0.0, 0.0, (0.0, 0.0), math.nan, r["eps"], r["s"],
                                 r["delta"], (r["d1"], r["d2"])))
    rep = check_term_bounds(bds, cfg.params(), float(cfg.numerics["slack"]))
    slack = float(cfg.numerics["slack"])
    checks = [_check(f"{row['term']} exponent", not row["flagged"], row.get("measured"),
                     row["predicted"] - slack, ">=") for row in rep.rows if not row.get("skipped")]
    return {"summary": rep.summary(),
            "exponents": {row["term"]: {"measured": row.get("measured"), "predicted": row["predicted"]}
                          for row in rep.rows}}, checks


def _born_point(cfg, eps):
    from .scattering import LSOperator, MediumGrid, born_disk_far_field, far_field, solve_ls
    ph = cfg.physics
    k, c, R = float(ph["k"]), float(ph["contrast"]), float(ph["radius"])
    n = int(cfg.numerics["grid"])
    med = MediumGrid.from_function(lambda x, y: np.where(x * x + y * y < R * R, 1 + c, 1.0),
                                   k, 1.5 * R, n, subsample=8)
    d = np.asarray(ph["direction"], float)
    sol = solve_ls(med, direction=d)
    op = LSOperator(med)
    wb = sol.incident + op.convolve((med.q.ravel() - 1) * sol.incident)
    born = float(np.linalg.norm(sol.w - wb) / np.linalg.norm(sol.incident))
    ff = far_field(med, sol, int(cfg.numerics["n_theta"]), direction=d)
    an = born_disk_far_field(k, R, c, ff.theta, d / np.linalg.norm(d))
    ffe = float(np.linalg.norm(ff.values - an) / np.linalg.norm(an))
    return [{"metric": "born_field", "value": born}, {"metric": "born_far_field", "value": ffe},
            {"metric": "gmres_iterations", "value": sol.iterations}]


def _born_finish(cfg, rows):
    v = {r["metric"]: r["value"] for r in rows}
    return v, [_check("born field", v["born_field"] < cfg.tol("born"), v["born_field"], cfg.tol("born"), "<"),
               _check("born far field", v["born_far_field"] < cfg.tol("born_far_field"),
                      v["born_far_field"], cfg.tol("born_far_field"), "<")]


def _visibility_point(cfg, eps):
    from .scattering import far_field, solve_ls, thin_rectangle_medium
    ph = cfg.physics
    med = thin_rectangle_medium(eps, complex(ph["q0"]), float(ph["k"]), float(ph["length"]),
                                n=int(cfg.numerics["grid"]))
    sol = solve_ls(med, direction=ph["direction"])
    nrm = far_field(med, sol, int(cfg.numerics["n_theta"]), direction=ph["direction"]).l2_norm
    return [{"eps": eps, "far_field_norm": nrm, "area_normalized": nrm / eps,
             "gmres_iterations": sol.iterations}]


def _visibility_finish(cfg, rows):
    norms = [r["area_normalized"] for r in rows]
    spread = max(norms) / min(norms) if min(norms) > 0 else math.inf
    checks = [_check(f"visible eps={r['eps']:g}", r["far_field_norm"] >= 1e-12, r["far_field_norm"],
                     1e-12, ">=") for r in rows]
    lim = cfg.tol("visibility_spread")
    checks.append(_check("area-normalized spread", spread < lim, spread, lim, "<"))
    return {"spread": spread}, checks


def _boundedness_point(cfg, eps):
    from .scattering import l2_ratio_on_ball, solve_ls, thin_rectangle_medium
    ph = cfg.physics
    L = float(ph["length"])
    R = L / 2 + max(cfg.eps)
    med = thin_rectangle_medium(eps, complex(ph["q0"]), float(ph["k"]), L, half_width=2 * R + 0.05,
                                n=int(cfg.numerics["grid"]))
    sol = solve_ls(med, direction=ph["direction"])
    return [{"eps": eps, "ratio": l2_ratio_on_ball(sol, 2 * R), "R": R}]


def _boundedness_finish(cfg, rows):
    from .estimates import fit_decay_exponent
    fit = fit_decay_exponent([r["eps"] for r in rows], [r["ratio"] for r in rows], "boundedness")
    lim = cfg.tol("flat_slope")
    lo = min(r["ratio"] for r in rows)
    return ({"slope": fit.tau_hat, "C_fit": max(r["ratio"] for r in rows)},
            [_check("flat trend", abs(fit.tau_hat) <= lim, fit.tau_hat, lim, "|x|<="),
             _check("ratio lower bound", lo >= 0.8, lo, 0.8, ">=")])


def _farfield_point(cfg, eps):
    from .scattering import MediumGrid, compare_far_fields, far_field, solve_ls
    ph = cfg.physics
    k, q0 = float(ph["k"]), complex(ph["q0"])
    R = float(ph["radius"])
    n = int(cfg.numerics["grid"])
    d = ph["direction"]

    def base(x, y):
        return np.where(x * x + y * y < R * R, q0, 1.0)

    def with_end(x, y):
        end = (x >= 0) & (x < R + 0.3) & (np.abs(y) < eps / 2)
        return np.where(end, q0, base(x, y))

    out = []
    ffs = {}
    for name, qf in (("base", base), ("with_end", with_end)):
        med = MediumGrid.from_function(qf, k, R + 0.4, n, subsample=8)
        ffs[name] = far_field(med, solve_ls(med, direction=d), int(cfg.numerics["n_theta"]), direction=d)
    out.append({"eps": eps, "pair": "identical", "discrepancy": compare_far_fields(ffs["base"], ffs["base"])})
    out.append({"eps": eps, "pair": "thin_end", "discrepancy": compare_far_fields(ffs["base"], ffs["with_end"])})
    return out


def _farfield_finish(cfg, rows):
    lim = cfg.tol("distinguishable")
    checks = []
    for r in rows:
        if r["pair"] == "identical":
            checks.append(_check(f"identical eps={r['eps']:g}", r["discrepancy"] == 0, r["discrepancy"], 0, "=="))
        else:
            checks.append(_check(f"thin end eps={r['eps']:g}", r["discrepancy"] > lim, r["discrepancy"], lim, ">"))
    return {}, checks


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    keys: tuple[str, ...]
    point: Callable
    finish: Callable
    sweep: bool = True


EXPERIMENTS: dict[str, Experiment] = {e.name: e for e in [
    Experiment("assumption-g", "nearest lateral point and normal colinearity on random interior samples",
               ("geometry.curve", "geometry.eps", "numerics.samples", "numerics.seed"),
               _assumption_g_point, _assumption_g_finish),
    Experiment("boundedness", "L2(B_2R) ratio |w|/|w^i| for thin rectangles; flat trend in eps",
               ("geometry.eps", "physics.k", "physics.q0", "physics.length", "numerics.grid"),
               _boundedness_point, _boundedness_finish),
    Experiment("cauchy-smallness", "sup|w|, sup|grad w| rates and C^{1,alpha} uniformity of the zero-Cauchy family",
               ("geometry.eps", "physics.alpha1", "numerics.h_ratio", "numerics.pairs"),
               _cauchy_point, _cauchy_finish),
    Experiment("coupled-identity", "coupled transmission identity residual and J-term sizes",
               ("geometry.eps", "physics.h1", "physics.h2", "physics.k", "physics.beta"),
               _coupled_point, _coupled_finish),
    Experiment("exponents", "exact decay exponents for the reference parameter sets",
               (), _exponents_point, _exponents_finish, sweep=False),
    Experiment("farfield-compare", "far-field discrepancy between a disk and the disk with a thin end",
               ("geometry.eps", "physics.q0", "physics.radius", "numerics.grid", "numerics.n_theta"),
               _farfield_point, _farfield_finish),
    Experiment("green-check", "Green's second identity residual under mesh refinement",
               ("physics.f", "physics.g", "numerics.h_list"), _green_point, _green_finish, sweep=False),
    Experiment("identity-check", "single-medium transmission identity for manufactured triples",
               ("geometry.eps", "physics.q", "physics.k", "physics.alpha1", "numerics.h_ratio"),
               _identity_point, _identity_finish),
    Experiment("ls-born", "Lippmann-Schwinger solve against the Born approximation for a weak disk",
               ("physics.k", "physics.contrast", "physics.radius", "numerics.grid"),
               _born_point, _born_finish, sweep=False),
    Experiment("term-bounds", "polynomial scaling of I1..I6 against the predicted exponents",
               ("geometry.eps", "physics.q", "physics.alpha1", "physics.beta"), _term_point, _term_finish),
    Experiment("visibility", "far-field norm of thin rectangles; positivity and area scaling",
               ("geometry.eps", "physics.k", "physics.q0", "numerics.grid", "numerics.n_theta"),
               _visibility_point, _visibility_finish),
]}


def list_experiments() -> list[dict]:
    return [{"name": e.name, "description": e.description, "required": list(e.keys)}
            for e in sorted(EXPERIMENTS.values(), key=lambda e: e.name)]


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

def _task(args):
    name, cfg_dict, eps = args
    cfg = parse_config(cfg_dict)
    return EXPERIMENTS[name].point(cfg, eps)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".12g")
    if isinstance(v, complex):
        return f"{v.real:.12g}{v.imag:+.12g}j"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if not math.isfinite(v) else float(_fmt(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, complex):
        return [_jsonable(v.real), _jsonable(v.imag)]
    return v


def render_csv(name: str, rows: list[dict], stamp: str | None = None) -> str:
    stamp = stamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA} experiment={name} generated={stamp}\n")
    cols: list[str] = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


@dataclass
class RunResult:
    name: str
    rows: list[dict]
    summary: dict
    checks: list[dict]

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def record(self, cfg: ExperimentConfig) -> dict:
        return _jsonable({"experiment": self.name, "schema": SCHEMA, "ok": self.ok,
                          "failures": [c["check"] for c in self.checks if not c["ok"]],
                          "checks": self.checks, "summary": self.summary, "rows": self.rows,
                          "config": cfg.as_dict()})


def run_experiment(name: str, cfg: ExperimentConfig, jobs: int = 1,
                   pool: ProcessPoolExecutor | None = None) -> RunResult:
    exp = EXPERIMENTS[name]
    points = cfg.eps if exp.sweep else [cfg.eps[0]]
    tasks = [(name, cfg.raw, e) for e in points]
    if pool is not None and len(tasks) > 1:
        parts = list(pool.map(_task, tasks))
    else:
        parts = [exp.point(cfg, e) for e in points]
    rows = [r for part in parts for r in part]
    summary, checks = exp.finish(cfg, rows)
    return RunResult(name, rows, summary, checks)


def output_dir(cfg: ExperimentConfig, override: str | None = None) -> Path:
    return Path(override or os.environ.get(ENV_OUT) or cfg.output["dir"])


def run(cfg: ExperimentConfig, jobs: int = 1, out: str | None = None,
        log: Callable[[str], None] = lambda s: print(s, file=sys.stderr)) -> tuple[int, list[RunResult]]:
    outdir = output_dir(cfg, out)
    outdir.mkdir(parents=True, exist_ok=True)
    results = []
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for name in cfg.experiments:
            res = run_experiment(name, cfg, jobs, pool)
            results.append(res)
            (outdir / f"{name}.csv").write_text(render_csv(name, res.rows))
            (outdir / f"{name}.json").write_text(json.dumps(res.record(cfg), indent=2, sort_keys=True) + "\n")
            status = "PASS" if res.ok else "FAIL"
            log(f"{status} {name}: {len(res.rows)} rows -> {outdir / name}.csv")
            for c in res.checks:
                if not c["ok"]:
                    log(f"  failed {name}/{c['check']}: {c['value']} {c['relation']} {c['limit']} is false")
    finally:
        if pool is not None:
            pool.shutdown()
    return (0 if all(r.ok for r in results) else 1), results


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinend", description="thin-end transmission/scattering experiments")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the experiments named in a config")
    r.add_argument("-c", "--config", required=True)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--out", default=None, help=f"output directory (overrides ${ENV_OUT})")
    v = sub.add_parser("validate", help="parse and validate a config")
    v.add_argument("-c", "--config", required=True)
    ls = sub.add_parser("list", help="list available experiments")
    ls.add_argument("--json", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.cmd == "list":
        cat = list_experiments()
        if args.json:
            print(json.dumps(cat, indent=2))
        else:
            for e in cat:
                print(f"{e['name']:<18} {e['description']}")
                if e["required"]:
                    print(f"{'':<18} keys: {', '.join(e['required'])}")
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(json.dumps({"errors": exc.errors}, indent=2), file=sys.stderr)
        return 2
    if args.cmd == "validate":
        print(json.dumps({"ok": True, "experiments": cfg.experiments}))
        return 0
    if args.jobs < 1:
        print(json.dumps({"errors": ["--jobs must be >= 1"]}), file=sys.stderr)
        return 2
    code, _ = run(cfg, args.jobs, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
