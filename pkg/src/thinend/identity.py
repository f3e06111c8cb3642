"""Green's formula, transmission integral identities and their term-wise
decomposition on the subregion D.

Two identities are evaluated with the same quadrature:

* single medium (``mode="corollary2"``): for ``Δw + k² q w = k² (1 - q) v`` with
  ``w = ∂ν w = 0`` on the lateral boundary,
  ``∫_{Γ1∪Γ2} (w ∂ν u0 - u0 ∂ν w) = k² ∫ (q-1) v u0 + k² ∫ q w u0``;
* coupled (``mode="theorem1"``): after the Liouville transform,
  ``∫ F(x0) u0 h1^{-1/2} = -J_F - J_g - J_w~ - J_v~ + J_b``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp

from .cgo import CgoParams, DecayCertificate, cgo_eval, cgo_grad, select_direction
from .errors import BoundaryDataError, RegimeError, SectorError, SingularMediumError, SweepError
from .estimates import ExponentParams, fit_decay_exponent
from .fields import (CoefficientSet, ScalarField, SymbolicField, X1, X2, constant,
                     liouville_transform, make_zero_cauchy_family)
from .geometry import Mesh2D, ProductEnd2D, Subregion
from .quadrature import gauss_interval


def _as_field(q, curve=None) -> SymbolicField:
    if isinstance(q, SymbolicField):
        return q
    return constant(q)


def green_residual(f: ScalarField, g: ScalarField, mesh: Mesh2D) -> float:
    """|∫(g Δf - f Δg) - ∮(g ∂ν f - f ∂ν g)| with volume and edge quadrature."""
    pts, w = mesh.volume_quadrature()
    vol = np.sum(w * (g.value(pts) * f.laplacian(pts) - f.value(pts) * g.laplacian(pts)))
    bp, nu, bw, _ = mesh.boundary_quadrature()
    bnd = np.sum(bw * (g.value(bp) * f.normal_derivative(bp, nu)
                       - f.value(bp) * g.normal_derivative(bp, nu)))
    return float(abs(vol - bnd))


@dataclass
class TermBreakdown:
    mode: str
    terms: dict[str, complex]
    residual: float
    relative_residual: float
    anchor: tuple[float, float]
    h: float
    eps: float = math.nan
    s: float = math.nan
    delta: float = math.nan
    d: tuple[float, float] = (math.nan, math.nan)
    reconstruction_residual: float = math.nan
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        enc = {k: [float(np.real(v)), float(np.imag(v))] for k, v in self.terms.items()}
        return {"mode": self.mode, "eps": self.eps, "s": self.s, "terms": enc,
                "residual": self.residual, "relative_residual": self.relative_residual,
                "reconstruction_residual": self.reconstruction_residual,
                "anchor": [float(a) for a in self.anchor], "h": self.h,
                "delta": self.delta, "d": [float(v) for v in self.d]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class ManufacturedTriple:
    w: SymbolicField
    q: SymbolicField
    k: float
    v: SymbolicField
    eps0: float

    @property
    def u(self) -> SymbolicField:
        return self.v + self.w


def _end_samples(end: ProductEnd2D, n: int = 64) -> np.ndarray:
    lo, hi = end.interval
    t = np.linspace(lo, hi, 4 * n)
    s = np.linspace(0.0, 1.0, n // 4 + 1)
    T, S = np.meshgrid(t, s, indexing="ij")
    g = end.curve(T.ravel())
    return np.column_stack([T.ravel(), g - end.eps * S.ravel()])


def manufacture_triple(end: ProductEnd2D, eps: float, alpha1, q, k: float,
                       profile: SymbolicField | None = None, w: SymbolicField | None = None,
                       order: int = 2) -> ManufacturedTriple:
    """w from the zero-Cauchy family and v = (Δw + k² q w) / (k² (1 - q))."""
    qf = _as_field(q)
    pts = _end_samples(end)
    phi = qf.value(pts) - 1
    eps0 = float(np.min(np.abs(phi)))
    crosses = np.any(phi.real > 0) and np.any(phi.real < 0)
    if eps0 <= 1e-12 or crosses:
        raise SingularMediumError(f"q - 1 vanishes or changes sign (min |q-1| = {eps0:g})")
    if w is None:
        w = make_zero_cauchy_family(end, eps, alpha1, profile, order)
    k2 = float(k) ** 2
    v = (w.laplacian_field() + k2 * qf * w) / (k2 * (1 - qf))
    v.name = "v"
    return ManufacturedTriple(w, qf, float(k), v, eps0)


def certify(cgo: CgoParams, sub: Subregion, n: int = 512) -> DecayCertificate:
    """Decay certificate of ``cgo.d`` on the boundary samples of ``sub``."""
    x = sub.boundary_samples(n)
    r = np.linalg.norm(x, axis=1)
    if np.any(r <= 0):
        raise SectorError("subregion touches the origin")
    d = np.asarray(cgo.d)
    delta = float(np.min(-(x @ d) / r))
    if not delta > 0:
        raise SectorError(f"direction {tuple(d)} is not certified on the subregion (delta={delta:g})")
    ref = select_direction(x)
    return DecayCertificate(cgo.d, delta, float(r.min()), ref.theta1, ref.theta2,
                            math.atan2(d[1], d[0]))


def default_cgo(sub: Subregion, s: float) -> CgoParams:
    cert = select_direction(sub.boundary_samples(512))
    return CgoParams.from_direction(s, cert.d)


def lemma_terms(w: ScalarField, v: ScalarField, q: ScalarField, k: float, cgo: CgoParams,
                sub: Subregion, mesh: Mesh2D, x0=None, mode: str = "corollary2") -> TermBreakdown:
    """I1..I6 for arbitrary (w, v, q); the identity residual is meaningful only
    when the triple actually solves the transmission system."""
    cert = certify(cgo, sub)
    x0 = sub.centroid if x0 is None else np.asarray(x0, float)
    pts, wt = mesh.volume_quadrature()
    u0 = cgo_eval(cgo, pts)
    qv = q.value(pts)
    phi = qv - 1
    wv = w.value(pts)
    vv = v.value(pts)
    if mode == "proposition1":
        vv = vv + wv
        qw = wv
    else:
        qw = qv * wv
    phi0 = complex(q.value(x0)[0] - 1)
    v0 = complex(v.value(x0)[0] + (w.value(x0)[0] if mode == "proposition1" else 0))
    I1 = v0 * np.sum(wt * (phi - phi0) * u0)
    I2 = phi0 * np.sum(wt * (vv - v0) * u0)
    I3 = np.sum(wt * (phi - phi0) * (vv - v0) * u0)
    I4 = np.sum(wt * qw * u0)
    I5 = phi0 * v0 * np.sum(wt * u0)
    bp, nu, bw, _ = mesh.boundary_quadrature(["Γ1", "Γ2"])
    dnu_u0 = np.sum(cgo_grad(cgo, bp) * nu, axis=1)
    I6 = np.sum(bw * (w.value(bp) * dnu_u0 - cgo_eval(cgo, bp) * w.normal_derivative(bp, nu)))
    k2 = k * k
    rhs = k2 * np.sum(wt * phi * vv * u0) + k2 * I4
    resid = float(abs(I6 - rhs))
    scale = max(abs(I6), abs(rhs))
    recon = float(abs(I5 - (I6 / k2 - (I1 + I2 + I3 + I4))))
    terms = {"I1": I1, "I2": I2, "I3": I3, "I4": I4, "I5": I5, "I6": I6}
    return TermBreakdown(mode, {k_: complex(v_) for k_, v_ in terms.items()}, resid,
                         resid / scale if scale > 0 else 0.0, tuple(x0), mesh.h, sub.eps, cgo.s,
                         cert.delta, tuple(cgo.d), recon,
                         {"lhs": complex(I6), "rhs": complex(rhs), "m": float(sub.m),
                          "ell": float(sub.ell)})


def transmission_identity_residual(t: ManufacturedTriple, cgo: CgoParams, sub: Subregion,
                                   mesh: Mesh2D, x0=None, mode: str = "corollary2") -> TermBreakdown:
    """LHS/RHS of the single-medium identity plus the I1..I6 split.

    ``mode="proposition1"`` uses u = v + w in place of v and drops q from the
    w-term.
    """
    if mode not in ("corollary2", "proposition1"):
        raise ValueError(f"unknown mode {mode!r}")
    return lemma_terms(t.w, t.v, t.q, t.k, cgo, sub, mesh, x0, mode)


def _div_flux(h: SymbolicField, u: SymbolicField):
    """-div(h grad u) as a sympy expression."""
    return -(sp.diff(h.expr * sp.diff(u.expr, X1), X1) + sp.diff(h.expr * sp.diff(u.expr, X2), X2))


def check_tbc(u: SymbolicField, v: SymbolicField, coeffs: CoefficientSet, mesh: Mesh2D,
              tol: float = 1e-8) -> float:
    bp, nu, bw, _ = mesh.boundary_quadrature(["Γ3", "Γ4"])
    uv, vv = u.value(bp), v.value(bp)
    fu = coeffs.h1.value(bp) * u.normal_derivative(bp, nu)
    fv = coeffs.h2.value(bp) * v.normal_derivative(bp, nu)
    scale = max(1.0, float(np.max(np.abs(vv))), float(np.max(np.abs(fv))))
    err = max(float(np.max(np.abs(uv - vv))), float(np.max(np.abs(fu - fv)))) / scale
    if err > tol:
        raise BoundaryDataError(f"transmission conditions violated on the lateral boundary ({err:.3e})")
    return err


def coupled_identity_breakdown(u: SymbolicField, v: SymbolicField, coeffs: CoefficientSet,
                               cgo: CgoParams, sub: Subregion, mesh: Mesh2D, x0=None,
                               tbc_tol: float = 1e-8) -> TermBreakdown:
    check_tbc(u, v, coeffs, mesh, tbc_tol)
    cert = certify(cgo, sub)
    x0 = sub.centroid if x0 is None else np.asarray(x0, float)
    lt = liouville_transform(u, v, coeffs, check_pts=mesh.nodes)
    h1, h2 = coeffs.h1, coeffs.h2
    curve = u.curve or v.curve or h1.curve or h2.curve
    f = SymbolicField(_div_flux(h1, u), curve, None, "f")
    g = SymbolicField(_div_flux(h2, v), curve, None, "g")
    F = f - g
    pts, wt = mesh.volume_quadrature()
    u0 = cgo_eval(cgo, pts)
    h1v, h2v = h1.value(pts), h2.value(pts)
    ih1 = h1v ** -0.5
    Fv = F.value(pts)
    F0 = complex(F.value(x0)[0])
    J = F0 * np.sum(wt * u0 * ih1)
    JF = np.sum(wt * (Fv - F0) * u0 * ih1)
    cg = (h2v - h1v) / (np.sqrt(h1v) * h2v + h1v * np.sqrt(h2v))
    Jg = np.sum(wt * cg * u0 * g.value(pts))
    Jw = np.sum(wt * lt.B.value(pts) * u0 * lt.w_t.value(pts))
    Jv = np.sum(wt * lt.A.value(pts) * u0 * lt.v_t.value(pts))
    bp, nu, bw, _ = mesh.boundary_quadrature()
    dnu_u0 = np.sum(cgo_grad(cgo, bp) * nu, axis=1)
    Jb = np.sum(bw * (lt.w_t.value(bp) * dnu_u0 - cgo_eval(cgo, bp) * lt.w_t.normal_derivative(bp, nu)))
    rhs = -JF - Jg - Jw - Jv + Jb
    resid = float(abs(J - rhs))
    scale = max(abs(J), abs(JF), abs(Jg), abs(Jw), abs(Jv), abs(Jb))
    terms = {"J": J, "J_F": JF, "J_g": Jg, "J_w": Jw, "J_v": Jv, "J_b": Jb}
    return TermBreakdown("theorem1", {k_: complex(v_) for k_, v_ in terms.items()}, resid,
                         resid / scale if scale > 0 else 0.0, tuple(x0), mesh.h, sub.eps, cgo.s,
                         cert.delta, tuple(cgo.d), math.nan,
                         {"m": float(sub.m), "ell": float(sub.ell)})


def lateral_smallness(u: SymbolicField, v: SymbolicField, coeffs: CoefficientSet,
                      mesh: Mesh2D) -> dict[str, float]:
    """Sup norms of w~ and ∂ν w~ on Γ3 ∪ Γ4, and the defect of their closed forms."""
    lt = liouville_transform(u, v, coeffs, check_pts=mesh.nodes)
    bp, nu, _, _ = mesh.boundary_quadrature(["Γ3", "Γ4"])
    h1, h2 = coeffs.h1.value(bp), coeffs.h2.value(bp)
    vt = lt.v_t.value(bp)
    wt = lt.w_t.value(bp)
    dwt = lt.w_t.normal_derivative(bp, nu)
    closed_w = (h1 - h2) / (np.sqrt(h1 * h2) + h2) * vt
    gh = coeffs.h2.normal_derivative(bp, nu) - coeffs.h1.normal_derivative(bp, nu)
    closed_dw = ((h2 - h1) * lt.v_t.normal_derivative(bp, nu) / (np.sqrt(h1) * (np.sqrt(h1) + np.sqrt(h2)))
                 - 0.5 / np.sqrt(h1 * h2) * gh * vt)
    scale = max(1.0, float(np.max(np.abs(vt))))
    return {"w_sup": float(np.max(np.abs(wt))), "dw_sup": float(np.max(np.abs(dwt))),
            "w_defect": float(np.max(np.abs(wt - closed_w))) / scale,
            "dw_defect": float(np.max(np.abs(dwt - closed_dw))) / scale}


# --------------------------------------------------------------------------
# term-bound scaling
# --------------------------------------------------------------------------

def predicted_exponents(p: ExponentParams, mode: str) -> dict[str, float]:
    a, a1, b, l = p.alpha, p.alpha1, p.beta, p.ell
    if mode in ("corollary2", "proposition1"):
        pred = {"I1": a * l - 2 * b, "I2": a1 * l - 2 * b, "I3": (a + a1) * l - 2 * b,
                "I4": 1 + a1 - 2 * b, "I6": min(2 + a1 + b, 1 + a1)}
    else:
        a2, a3, z = p.alpha2, p.alpha3, p.zeta
        pred = {"J_F": z * a1 * l - 2 * b, "J_g": a3 - 2 * b, "J_v": min(a3, a2) - 2 * b,
                "J_w": min(a3, 1 + a1) - 2 * b,
                "J_b": min(1 + a3 + b, 2 + a1 + b, 1 + a1, a3 + b + l)}
    return {k: float(Fraction(v)) for k, v in pred.items()}


BOUNDARY_TERMS = ("I6", "J_b")


@dataclass
class BoundReport:
    rows: list[dict]
    all_zero: bool = False

    @property
    def flagged(self) -> list[str]:
        return [r["term"] for r in self.rows if r.get("flagged")]

    @property
    def ok(self) -> bool:
        return not self.flagged

    def summary(self) -> str:
        if self.all_zero:
            return "all terms ≡ 0"
        return "; ".join(f"{r['term']}: {r.get('measured', float('nan')):.3f} vs {r['predicted']:.3f}"
                         for r in self.rows)


def check_term_bounds(breakdowns: list[TermBreakdown], params: ExponentParams,
                      slack: float = 0.1, zero_tol: float = 1e-300) -> BoundReport:
    eps = [b.eps for b in breakdowns]
    if len(set(eps)) < 4:
        raise SweepError("need at least 4 distinct eps values")
    mode = breakdowns[0].mode
    pred = predicted_exponents(params, mode)
    m = float(params.m)
    rows, nonzero = [], False
    for term, pexp in pred.items():
        ys, es = [], []
        for b in breakdowns:
            val = abs(b.terms.get(term, 0.0))
            if term in BOUNDARY_TERMS:
                factor = math.exp(b.s * b.d[0] * b.eps ** m)
            else:
                factor = math.exp(-b.eps ** m * b.s * b.delta / 4)
            ys.append(val / factor)
            es.append(b.eps)
        if max(ys) <= zero_tol:
            rows.append({"term": term, "predicted": pexp, "skipped": True, "flagged": False})
            continue
        nonzero = True
        if min(ys) <= 0:
            rows.append({"term": term, "predicted": pexp, "skipped": True, "flagged": False,
                         "note": "some sweep points vanish"})
            continue
        fit = fit_decay_exponent(es, ys, label=term)
        rows.append({"term": term, "predicted": pexp, "measured": fit.tau_hat, "r2": fit.r2,
                     "flagged": fit.tau_hat < pexp - slack, "eps": fit.eps, "y": fit.y})
    return BoundReport(rows, all_zero=not nonzero)


# --------------------------------------------------------------------------
# anchored lower bound
# --------------------------------------------------------------------------

def anchored_lower_bound(cgo: CgoParams, sub: Subregion, mesh: Mesh2D, h1: ScalarField | None = None,
                         n_fiber: int = 2001, n_quad: int = 64) -> float:
    """Computable lower bound for |∫_D u0 h1^{-1/2}| from the fiber factorization.

    ∫_D e^{ρ·x} = [∫ e^{s(d1-i d2)x1 + s(d2+i d1)g(x1)} dx1] · e^{-s(d2+i d1)γ(a)} ·
    ∫_{γ(a)-ε}^{γ(a)} e^{s(d2+i d1)y} dy. The first factor is ε^ℓ + ∫A with |∫A| ≤ ∫|A|
    (series summed exactly); the fiber factor is bounded below by ε times the
    minimum of e^{sεd2 x~}|cos(sεd1 x~)| over the fiber.
    """
    certify(cgo, sub)
    s, (d1, d2) = cgo.s, cgo.d
    eps, ell = sub.eps, sub.length
    ga = float(sub.g(sub.x_lo))
    xt = np.linspace(ga / eps - 1, ga / eps, n_fiber)
    cosv = np.cos(s * eps * d1 * xt)
    if np.any(cosv <= 0):
        raise RegimeError("cos(s eps d1 x~) changes sign on the fiber")
    fiber = float(np.min(np.exp(s * eps * d2 * xt) * cosv))
    x1, w1 = gauss_interval(sub.x_lo, sub.x_hi, n_quad)
    z = s * ((d1 - 1j * d2) * x1 + (d2 + 1j * d1) * sub.g(x1))
    intA = float(np.sum(w1 * np.abs(np.expm1(z))))
    core = ell - intA
    if core <= 0:
        raise RegimeError(f"series factor ∫|A|/ε^ℓ = {intA / ell:.3f} ≥ 1")
    pts, wt = mesh.volume_quadrature()
    ih = np.ones(len(wt)) if h1 is None else np.real(h1.value(pts)) ** -0.5
    M = float(np.min(ih))
    bound = M * eps * math.exp(-s * d2 * ga) * fiber * core
    lhs = abs(np.sum(wt * cgo_eval(cgo, pts) * ih))
    if lhs < bound * (1 - 1e-10):
        raise RegimeError(f"lower bound violated: |∫u0 h^-1/2| = {lhs:.6e} < {bound:.6e}")
    return bound
