"""Thin product-type ends, their subregions, structured meshes and the
nearest-lateral-point (Assumption G) check.

Coordinates follow the usual layout of a 2D thin end::

    top    graph  x2 = gamma(x1)
    bottom graph  x2 = gamma(x1) - eps,     x1 in (-L, L)

A subregion ``D`` lives in shifted coordinates where its left cap sits at
``x1 = eps**m``. Meshes of ``D`` are built on a reference rectangle
``(xi, eta) in [eps**m, eps**m + eps**ell] x [0, eps]`` and pushed forward by the
area-preserving shear ``(xi, eta) -> (xi, g(xi) - eps + eta)``. Quadrature
points are mapped through the same shear, so volume and boundary integrals see
the exact curved domain while the triangles themselves are straight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, TextIO

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import ConstraintError, DomainError, GeometryError, MeshError
from .quadrature import GAUSS5, TRI7

EPS_MIN = 1e-6
TAGS = ("Γ1", "Γ2", "Γ3", "Γ4")
_TAG_ALIASES = {"G1": "Γ1", "G2": "Γ2", "G3": "Γ3", "G4": "Γ4",
                "gamma1": "Γ1", "gamma2": "Γ2", "gamma3": "Γ3", "gamma4": "Γ4"}


def normalize_tag(tag: str) -> str:
    return _TAG_ALIASES.get(tag, tag)


# --------------------------------------------------------------------------
# curves and ends
# --------------------------------------------------------------------------

class GraphCurve:
    """C² piecewise-cubic graph t -> gamma(t) on [-L, L] (optionally shifted)."""

    def __init__(self, knots: np.ndarray, values: np.ndarray, offset: float = 0.0,
                 name: str = "spline"):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if knots.ndim != 1 or knots.size < 4 or np.any(np.diff(knots) <= 0):
            raise GeometryError("knots must be strictly increasing with at least 4 entries")
        self._spline = CubicSpline(knots, values, bc_type="not-a-knot")
        self.knots = knots
        self.values = values
        self.offset = float(offset)
        self.name = name

    @classmethod
    def flat(cls, L: float = 1.0) -> "GraphCurve":
        t = np.linspace(-L, L, 5)
        return cls(t, np.zeros_like(t), name="flat")

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], L: float,
                      n_knots: int = 801, name: str = "function") -> "GraphCurve":
        t = np.linspace(-L, L, n_knots)
        return cls(t, f(t), name=name)

    @classmethod
    def sine(cls, amplitude: float, L: float = 2.0, freq: float = 1.0,
             n_knots: int = 801) -> "GraphCurve":
        return cls.from_function(lambda t: amplitude * np.sin(freq * t), L, n_knots,
                                 name=f"sine({amplitude},{freq})")

    @property
    def interval(self) -> tuple[float, float]:
        return self.knots[0] - self.offset, self.knots[-1] - self.offset

    @property
    def L(self) -> float:
        return 0.5 * (self.knots[-1] - self.knots[0])

    @cached_property
    def amplitude(self) -> float:
        tt = np.linspace(self.knots[0], self.knots[-1], 20 * self.knots.size + 1)
        return float(np.max(np.abs(self._spline(tt))))

    def __call__(self, t, nu: int = 0):
        return self._spline(np.asarray(t, dtype=float) + self.offset, nu)

    def d1(self, t):
        return self(t, 1)

    def d2(self, t):
        return self(t, 2)

    def shifted(self, offset: float) -> "GraphCurve":
        """Curve t -> gamma(t + offset), on the correspondingly shifted interval."""
        c = GraphCurve.__new__(GraphCurve)
        c.__dict__.update(self.__dict__)
        c.__dict__.pop("amplitude", None)
        c.offset = self.offset + float(offset)
        return c


@dataclass(frozen=True)
class ProductEnd2D:
    curve: GraphCurve
    eps: float
    c_gamma: float = 1.0

    def top(self, t):
        return self.curve(t)

    def bottom(self, t):
        return self.curve(t) - self.eps

    @property
    def interval(self) -> tuple[float, float]:
        return self.curve.interval

    def contains(self, x, strict: bool = True) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo, hi = self.interval
        t = x[:, 0]
        inside_t = (t > lo) & (t < hi) if strict else (t >= lo) & (t <= hi)
        tc = np.clip(t, lo, hi)
        g = self.curve(tc)
        if strict:
            return inside_t & (x[:, 1] < g) & (x[:, 1] > g - self.eps)
        return inside_t & (x[:, 1] <= g) & (x[:, 1] >= g - self.eps)


def build_thin_end_2d(curve: GraphCurve, eps: float, c_gamma: float = 1.0) -> ProductEnd2D:
    eps = float(eps)
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if eps < EPS_MIN:
        raise DomainError(f"eps below {EPS_MIN} is not supported")
    if curve.amplitude > c_gamma * eps * (1 + 1e-12):
        raise GeometryError(f"max|gamma| = {curve.amplitude:g} exceeds {c_gamma}*eps = {c_gamma * eps:g}")
    return ProductEnd2D(curve, eps, c_gamma)


@dataclass(frozen=True)
class ProductEnd3D:
    """3D end over a planar graph curve; used for Assumption-G checks only.

    ``kind="thin"``: disk cross-section of diameter eps centered at
    ``(t, gamma(t) - eps/2, 0)`` in the plane ``x1 = t``.
    ``kind="narrow"``: rectangle of width eps in x2 and height ``depth`` in x3.
    """
    curve: GraphCurve
    eps: float
    kind: str = "thin"
    depth: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if self.kind not in ("thin", "narrow"):
            raise GeometryError(f"unknown cross-section kind {self.kind!r}")
        if self.curve.amplitude > self.eps * (1 + 1e-12):
            raise GeometryError("curve amplitude exceeds eps")

    @property
    def cross_section_size(self) -> float:
        return self.eps

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        lo, hi = self.curve.interval
        if not lo < x[0] < hi:
            return False
        g = float(self.curve(x[0]))
        if self.kind == "thin":
            return (x[1] - g + self.eps / 2) ** 2 + x[2] ** 2 < (self.eps / 2) ** 2
        return g - self.eps < x[1] < g and 0 < x[2] < self.depth


# --------------------------------------------------------------------------
# nearest lateral point
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NearestPoint:
    x0: np.ndarray
    nu: np.ndarray
    residual: float
    dist: float
    which: str

    def __iter__(self):
        return iter((self.x0, self.nu, self.residual, self.dist))


def _min_over_param(fun: Callable[[float], float], lo: float, hi: float,
                    n_seed: int = 256, tol: float = 1e-13) -> float:
    ts = np.linspace(lo, hi, n_seed)
    vals = np.array([fun(t) for t in ts])
    i = int(np.argmin(vals))
    a, b = ts[max(i - 1, 0)], ts[min(i + 1, n_seed - 1)]
    res = minimize_scalar(fun, bounds=(a, b), method="bounded",
                          options={"xatol": tol * max(1.0, abs(b - a)), "maxiter": 500})
    cands = [(fun(t), t) for t in (res.x, a, b, ts[i], lo, hi)]
    return min(cands)[1]


def nearest_lateral_point(end: ProductEnd2D | ProductEnd3D, x) -> NearestPoint:
    """Closest point of the lateral boundary, its outward normal and the colinearity defect."""
    x = np.asarray(x, dtype=float)
    if isinstance(end, ProductEnd3D):
        return _nearest_3d(end, x)
    if not bool(end.contains(x)[0]):
        raise DomainError(f"point {x.tolist()} is not inside the end")
    lo, hi = end.interval
    best = None
    for which, shift, sign in (("top", 0.0, 1.0), ("bottom", end.eps, -1.0)):
        f = lambda t: (t - x[0]) ** 2 + (float(end.curve(t)) - shift - x[1]) ** 2
        t = _min_over_param(f, lo, hi)
        d = math.sqrt(f(t))
        if best is None or d < best[0]:
            best = (d, t, which, shift, sign)
    d, t, which, shift, sign = best
    x0 = np.array([t, float(end.curve(t)) - shift])
    gp = float(end.curve.d1(t))
    nu = sign * np.array([-gp, 1.0]) / math.hypot(gp, 1.0)
    residual = float(np.linalg.norm((x0 - x) / d - nu)) if d > 0 else 0.0
    if d > end.eps * (1 + 1e-12):
        raise GeometryError(f"nearest lateral point at distance {d} > eps")
    return NearestPoint(x0, nu, residual, d, which)


def _nearest_3d(end: ProductEnd3D, x: np.ndarray) -> NearestPoint:
    if not end.contains(x):
        raise DomainError("point is not inside the end")
    lo, hi = end.curve.interval
    eps = end.eps
    c = end.curve
    cands = []
    if end.kind == "thin":
        r = eps / 2

        def f(t):
            p2, p3 = x[1] - (float(c(t)) - r), x[2]
            return (x[0] - t) ** 2 + (math.hypot(p2, p3) - r) ** 2

        t = _min_over_param(f, lo, hi)
        ctr = float(c(t)) - r
        p = np.array([x[1] - ctr, x[2]])
        pn = np.linalg.norm(p)
        dirn = p / pn if pn > 0 else np.array([1.0, 0.0])
        x0 = np.array([t, ctr + r * dirn[0], r * dirn[1]])
        y2 = x0[1] - ctr
        grad = np.array([-2 * y2 * float(c.d1(t)), 2 * y2, 2 * x0[2]])
        cands.append((math.sqrt(f(t)), x0, grad / np.linalg.norm(grad), "tube"))
    else:
        for which, shift, sign in (("top", 0.0, 1.0), ("bottom", eps, -1.0)):
            f = lambda t: (t - x[0]) ** 2 + (float(c(t)) - shift - x[1]) ** 2
            t = _min_over_param(f, lo, hi)
            gp = float(c.d1(t))
            x0 = np.array([t, float(c(t)) - shift, x[2]])
            nu = sign * np.array([-gp, 1.0, 0.0]) / math.hypot(gp, 1.0)
            cands.append((math.sqrt(f(t)), x0, nu, which))
        cands.append((x[2], np.array([x[0], x[1], 0.0]), np.array([0.0, 0.0, -1.0]), "floor"))
        cands.append((end.depth - x[2], np.array([x[0], x[1], end.depth]),
                      np.array([0.0, 0.0, 1.0]), "ceiling"))
    d, x0, nu, which = min(cands, key=lambda z: z[0])
    residual = float(np.linalg.norm((x0 - x) / d - nu)) if d > 0 else 0.0
    return NearestPoint(x0, nu, residual, float(d), which)


# --------------------------------------------------------------------------
# subregion
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Subregion:
    end: ProductEnd2D
    a: float
    ell: Fraction
    m: Fraction

    @property
    def eps(self) -> float:
        return self.end.eps

    @property
    def x_lo(self) -> float:
        return self.eps ** float(self.m)

    @property
    def length(self) -> float:
        return self.eps ** float(self.ell)

    @property
    def x_hi(self) -> float:
        return self.x_lo + self.length

    @property
    def shift(self) -> float:
        """Offset mapping subregion x1 back to end coordinates: t = x1 + shift."""
        return self.a - self.x_lo

    def g(self, x1, nu: int = 0):
        """Shifted top graph x1 -> gamma(x1 + a - eps^m) and its derivatives."""
        return self.end.curve(np.asarray(x1, dtype=float) + self.shift, nu)

    def shifted_end(self) -> ProductEnd2D:
        return ProductEnd2D(self.end.curve.shifted(self.shift), self.eps, self.end.c_gamma)

    def segments(self) -> dict[str, dict]:
        """Closed-form description of the four tagged boundary pieces."""
        e = self.eps
        ga, gb = float(self.g(self.x_lo)), float(self.g(self.x_hi))
        return {
            "Γ1": {"x1": self.x_lo, "x2": (ga - e, ga)},
            "Γ2": {"x1": self.x_hi, "x2": (gb - e, gb)},
            "Γ3": {"x1": (self.x_lo, self.x_hi), "x2": "g(x1)"},
            "Γ4": {"x1": (self.x_lo, self.x_hi), "x2": "g(x1) - eps"},
        }

    @property
    def area(self) -> float:
        return self.eps * self.length

    @property
    def centroid(self) -> np.ndarray:
        xg, wg = np.polynomial.legendre.leggauss(40)
        t = 0.5 * (xg + 1) * self.length + self.x_lo
        w = 0.5 * wg * self.length
        g = self.g(t)
        c1 = np.sum(w * t * self.eps) / self.area
        c2 = np.sum(w * self.eps * (g - self.eps / 2)) / self.area
        return np.array([c1, c2])

    def boundary_samples(self, n: int = 512) -> np.ndarray:
        """Points distributed along the closed boundary of D (counterclockwise)."""
        k = max(n // 4, 2)
        t = np.linspace(self.x_lo, self.x_hi, k, endpoint=False)
        s = np.linspace(0.0, 1.0, k, endpoint=False)
        e = self.eps
        bottom = np.column_stack([t, self.g(t) - e])
        right = np.column_stack([np.full(k, self.x_hi), float(self.g(self.x_hi)) - e + e * s])
        top = np.column_stack([t[::-1] + self.length / k, self.g(t[::-1] + self.length / k)])
        left = np.column_stack([np.full(k, self.x_lo), float(self.g(self.x_lo)) - e * s])
        return np.vstack([bottom, right, top, left])


def build_subregion(end: ProductEnd2D, a: float = 1.0, ell=Fraction(7, 9), m=Fraction(7, 9),
                    alpha1=Fraction(5, 6), n: int = 2) -> Subregion:
    ell, m, alpha1 = Fraction(ell).limit_denominator(10**9), Fraction(m).limit_denominator(10**9), \
        Fraction(alpha1).limit_denominator(10**9)
    bad = []
    if n == 2:
        if not ell < alpha1:
            bad.append("ell < alpha1")
        if not m > Fraction(1, 2):
            bad.append("m > 1/2")
    else:
        if not Fraction(2, 3) < ell < alpha1:
            bad.append("2/3 < ell < alpha1")
        if not m > Fraction(2, 3):
            bad.append("2/3 < m")
    if bad:
        raise ConstraintError("subregion exponents violate: " + ", ".join(bad))
    if not a > 0:
        raise DomainError("shift a must be positive")
    sub = Subregion(end, float(a), ell, m)
    lo, hi = end.interval
    if not (lo <= a and a + sub.length <= hi):
        raise DomainError(f"subregion t-range ({a}, {a + sub.length}) leaves the curve interval")
    return sub


# --------------------------------------------------------------------------
# meshes
# --------------------------------------------------------------------------

class IdentityChart:
    def map(self, ref):
        return np.asarray(ref, dtype=float)

    def jacobian(self, ref):
        ref = np.atleast_2d(ref)
        J = np.zeros((ref.shape[0], 2, 2))
        J[:, 0, 0] = J[:, 1, 1] = 1.0
        return J


class ShearChart:
    """(xi, eta) -> (xi, g(xi) - eps + eta); Jacobian determinant 1."""

    def __init__(self, g: Callable, eps: float):
        self.g = g
        self.eps = eps

    def map(self, ref):
        ref = np.atleast_2d(np.asarray(ref, dtype=float))
        return np.column_stack([ref[:, 0], self.g(ref[:, 0]) - self.eps + ref[:, 1]])

    def jacobian(self, ref):
        ref = np.atleast_2d(ref)
        J = np.zeros((ref.shape[0], 2, 2))
        J[:, 0, 0] = J[:, 1, 1] = 1.0
        J[:, 1, 0] = self.g(ref[:, 0], 1)
        return J


@dataclass
class Mesh2D:
    ref_nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: list[str]
    h: float
    chart: object = field(default_factory=IdentityChart)
    ref_bounds: tuple[float, float, float, float] | None = None

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.chart.map(self.ref_nodes)

    @property
    def n_nodes(self) -> int:
        return self.ref_nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        u, v = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def max_edge_length(self) -> float:
        e = self.edges()
        return float(np.max(np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1)))

    def aspect_ratios(self) -> np.ndarray:
        """Longest edge squared over twice the area (2/sqrt(3) for equilateral)."""
        p = self.nodes[self.triangles]
        lens = np.stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)], axis=1)
        return np.max(lens, axis=1) ** 2 / (2 * np.abs(self.triangle_areas()))

    def boundary_polygon_area(self) -> float:
        """Shoelace area of the closed boundary polygon traced by boundary edges."""
        p = self.nodes
        e = self.boundary_edges
        return 0.5 * float(np.sum(p[e[:, 0], 0] * p[e[:, 1], 1] - p[e[:, 1], 0] * p[e[:, 0], 1]))

    @cached_property
    def _volume_rule(self):
        lam, w = TRI7
        r = self.ref_nodes[self.triangles]
        a = r[:, 0]
        u, v = r[:, 1] - a, r[:, 2] - a
        area = 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        ref_pts = (a[:, None, :] + lam[None, :, 1, None] * u[:, None, :]
                   + lam[None, :, 2, None] * v[:, None, :]).reshape(-1, 2)
        J = self.chart.jacobian(ref_pts)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        wts = (area[:, None] * w[None, :]).reshape(-1) * det
        return self.chart.map(ref_pts), wts

    def volume_quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """7-point degree-5 rule per triangle, mapped through the chart."""
        return self._volume_rule

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> complex:
        pts, w = self.volume_quadrature()
        return np.sum(w * fn(pts))

    def boundary_quadrature(self, tags: Iterable[str] | None = None):
        """5-point Gauss per tagged edge: (points, unit outward normals, weights, tags)."""
        if tags is None:
            keep = np.array([t != "none" for t in self.edge_tags])
        else:
            wanted = {normalize_tag(t) for t in tags}
            for t in wanted:
                if t not in TAGS:
                    from .errors import TagError
                    raise TagError(t)
            keep = np.array([t in wanted for t in self.edge_tags])
        e = self.boundary_edges[keep]
        etags = [t for t, k in zip(self.edge_tags, keep) if k]
        if e.size == 0:
            z = np.zeros((0, 2))
            return z, z, np.zeros(0), []
        gx, gw = GAUSS5
        r0, r1 = self.ref_nodes[e[:, 0]], self.ref_nodes[e[:, 1]]
        dr = r1 - r0
        ref_pts = (r0[:, None, :] + gx[None, :, None] * dr[:, None, :]).reshape(-1, 2)
        J = self.chart.jacobian(ref_pts)
        tang = np.einsum("qij,qj->qi", J, np.repeat(dr, gx.size, axis=0))
        norm = np.linalg.norm(tang, axis=1)
        nu = np.column_stack([tang[:, 1], -tang[:, 0]]) / norm[:, None]
        w = np.tile(gw, e.shape[0]) * norm
        qtags = [t for t in etags for _ in range(gx.size)]
        return self.chart.map(ref_pts), nu, w, qtags

    def boundary_integral(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                          tags: Iterable[str] | None = None) -> complex:
        pts, nu, w, _ = self.boundary_quadrature(tags)
        return np.sum(w * fn(pts, nu)) if w.size else 0.0

    def sample_points(self, u: np.ndarray) -> np.ndarray:
        """Map uniform samples u in [0,1)^2 to points of the domain (uniform in area)."""
        x0, x1, y0, y1 = self.ref_bounds
        ref = np.column_stack([x0 + (x1 - x0) * u[:, 0], y0 + (y1 - y0) * u[:, 1]])
        return self.chart.map(ref)

    def triangle_edge_tags(self) -> list[tuple[str, str, str]]:
        lookup = {tuple(sorted(map(int, e))): t for e, t in zip(self.boundary_edges, self.edge_tags)}
        out = []
        for tri in self.triangles:
            out.append(tuple(lookup.get(tuple(sorted((int(tri[i]), int(tri[(i + 1) % 3])))), "none")
                             for i in range(3)))
        return out


def _structured(x0: float, x1: float, y0: float, y1: float, h: float, chart) -> Mesh2D:
    nx = max(1, math.ceil((x1 - x0) / h - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / h - 1e-9))
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    ref = np.column_stack([X.ravel(), Y.ravel()])
    idx = lambda i, j: i * (ny + 1) + j
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    I, J = I.ravel(), J.ravel()
    a, b, c, d = idx(I, J), idx(I + 1, J), idx(I + 1, J + 1), idx(I, J + 1)
    # alternate the diagonal to avoid a directional bias
    flip = (I + J) % 2 == 1
    t1 = np.where(flip[:, None], np.column_stack([a, b, d]), np.column_stack([a, b, c]))
    t2 = np.where(flip[:, None], np.column_stack([b, c, d]), np.column_stack([a, c, d]))
    tris = np.vstack([t1, t2])
    edges, tags = [], []
    tol = h / 10
    loop = ([(idx(i, 0), idx(i + 1, 0)) for i in range(nx)]
            + [(idx(nx, j), idx(nx, j + 1)) for j in range(ny)]
            + [(idx(i + 1, ny), idx(i, ny)) for i in reversed(range(nx))]
            + [(idx(0, j + 1), idx(0, j)) for j in reversed(range(ny))])
    for p, q in loop:
        mid = 0.5 * (ref[p] + ref[q])
        if abs(mid[0] - x0) < tol:
            tag = "Γ1"
        elif abs(mid[0] - x1) < tol:
            tag = "Γ2"
        elif abs(mid[1] - y1) < tol:
            tag = "Γ3"
        elif abs(mid[1] - y0) < tol:
            tag = "Γ4"
        else:
            tag = "none"
        edges.append((p, q))
        tags.append(tag)
    return Mesh2D(ref, tris.astype(np.int64), np.array(edges, dtype=np.int64), tags, h, chart,
                  (x0, x1, y0, y1))


def mesh_subregion(sub: Subregion, h: float) -> Mesh2D:
    if not h > 0 or h > sub.eps / 4 * (1 + 1e-12):
        raise MeshError(f"h = {h} must satisfy 0 < h <= eps/4 = {sub.eps / 4}")
    mesh = _structured(sub.x_lo, sub.x_hi, 0.0, sub.eps, h, ShearChart(sub.g, sub.eps))
    if np.any(mesh.triangle_areas() <= 0):
        raise MeshError("mesh contains non-positively oriented triangles")
    if np.max(mesh.aspect_ratios()) > 20:
        raise MeshError("triangle aspect ratio exceeds 20")
    return mesh


def mesh_rectangle(x0: float, x1: float, y0: float, y1: float, h: float) -> Mesh2D:
    """Axis-aligned rectangle; edges tagged left Γ1, right Γ2, top Γ3, bottom Γ4."""
    return _structured(x0, x1, y0, y1, h, IdentityChart())


def write_mesh(mesh: Mesh2D, fh: TextIO) -> None:
    fh.write(f"nodes {mesh.n_nodes} elements {mesh.n_elements}\n")
    for x, y in mesh.nodes:
        fh.write(f"{x:.17g} {y:.17g}\n")
    for tri, tags in zip(mesh.triangles, mesh.triangle_edge_tags()):
        fh.write(f"{tri[0]} {tri[1]} {tri[2]} {' '.join(tags)}\n")


def read_mesh(fh: TextIO) -> tuple[np.ndarray, np.ndarray, list[tuple[str, ...]]]:
    head = fh.readline().split()
    if len(head) != 4 or head[0] != "nodes" or head[2] != "elements":
        raise MeshError("bad mesh header")
    n, m = int(head[1]), int(head[3])
    nodes = np.array([[float(v) for v in fh.readline().split()] for _ in range(n)])
    tris, tags = [], []
    for _ in range(m):
        parts = fh.readline().split()
        tris.append([int(v) for v in parts[:3]])
        tags.append(tuple(parts[3:]))
    return nodes, np.array(tris, dtype=np.int64), tags
