"""Complex scalar fields, Hölder-norm certificates, Cauchy traces and
manufactured solution families.

Analytic fields are sympy expressions in ``x1, x2``; gradients and Laplacians
are derived symbolically once and compiled with ``lambdify``. A graph curve
enters expressions through the opaque functions ``G0 .. G3`` (gamma and its
first three derivatives), bound to the field's :class:`GraphCurve` at
evaluation time. Nodal fields carry P1 values on a :class:`Mesh2D`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, TextIO

import numpy as np
import sympy as sp

from .errors import DomainError, GeometryError
from .geometry import GraphCurve, Mesh2D, ProductEnd2D

X1, X2 = sp.symbols("x1 x2", real=True)


class G3(sp.Function):
    def fdiff(self, argindex=1):
        return sp.Integer(0)


class G2(sp.Function):
    def fdiff(self, argindex=1):
        return G3(self.args[0])


class G1(sp.Function):
    def fdiff(self, argindex=1):
        return G2(self.args[0])


class G0(sp.Function):
    def fdiff(self, argindex=1):
        return G1(self.args[0])


def _as_points(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return pts[None, :] if pts.ndim == 1 else pts


class ScalarField:
    """Common interface: value, gradient and Laplacian at an (N, 2) point array."""

    name: str = "field"
    domain: Mesh2D | None = None

    def value(self, pts) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, pts) -> np.ndarray:
        raise NotImplementedError(f"{self.name}: no gradient registered")

    def laplacian(self, pts) -> np.ndarray:
        raise NotImplementedError(f"{self.name}: no Laplacian registered")

    def normal_derivative(self, pts, nu) -> np.ndarray:
        return np.sum(self.gradient(pts) * np.asarray(nu), axis=-1)

    def __call__(self, pts):
        return self.value(pts)


class SymbolicField(ScalarField):
    def __init__(self, expr, curve: GraphCurve | None = None, domain: Mesh2D | None = None,
                 name: str = "analytic"):
        self.expr = sp.sympify(expr)
        self.curve = curve
        self.domain = domain
        self.name = name
        self._compiled: dict[str, Callable] = {}
        if curve is None and self.expr.has(G0, G1, G2, G3):
            raise GeometryError(f"{name}: expression uses gamma but no curve is bound")

    # pickling drops compiled lambdas
    def __getstate__(self):
        d = self.__dict__.copy()
        d["_compiled"] = {}
        return d

    def _modules(self):
        c = self.curve
        if c is None:
            return ["numpy"]
        return [{"G0": lambda t: c(t), "G1": lambda t: c(t, 1), "G2": lambda t: c(t, 2),
                 "G3": lambda t: c(t, 3)}, "numpy"]

    def _fn(self, key: str, expr) -> Callable:
        fn = self._compiled.get(key)
        if fn is None:
            fn = sp.lambdify((X1, X2), expr, modules=self._modules(), cse=True)
            self._compiled[key] = fn
        return fn

    def _eval(self, key: str, expr, pts) -> np.ndarray:
        pts = _as_points(pts)
        out = self._fn(key, expr)(pts[:, 0], pts[:, 1])
        return np.broadcast_to(np.asarray(out, dtype=complex), (pts.shape[0],)).copy()

    def value(self, pts):
        return self._eval("v", self.expr, pts)

    def partial_expr(self, i: int):
        return sp.diff(self.expr, (X1, X2)[i])

    def partial(self, i: int) -> "SymbolicField":
        return self._wrap(self.partial_expr(i), f"d{i + 1}({self.name})")

    def gradient(self, pts):
        return np.column_stack([self._eval(f"g{i}", self.partial_expr(i), pts) for i in (0, 1)])

    @property
    def laplacian_expr(self):
        return sp.diff(self.expr, X1, 2) + sp.diff(self.expr, X2, 2)

    def laplacian(self, pts):
        return self._eval("l", self.laplacian_expr, pts)

    def laplacian_field(self) -> "SymbolicField":
        return self._wrap(self.laplacian_expr, f"lap({self.name})")

    # algebra -------------------------------------------------------------
    def _merge_curve(self, other):
        oc = getattr(other, "curve", None)
        if self.curve is None:
            return oc
        if oc is not None and oc is not self.curve:
            raise GeometryError("cannot combine fields bound to different curves")
        return self.curve

    def _wrap(self, expr, name: str, curve=None) -> "SymbolicField":
        return SymbolicField(expr, curve if curve is not None else self.curve, self.domain, name)

    def _binop(self, other, op, sym: str, swap: bool = False):
        if isinstance(other, SymbolicField):
            curve = self._merge_curve(other)
            a, b = self.expr, other.expr
            name = f"({self.name}{sym}{other.name})"
            dom = self.domain or other.domain
        elif isinstance(other, (int, float, complex, sp.Basic)):
            curve = self.curve
            a, b = self.expr, sp.sympify(other)
            name = f"({self.name}{sym}{other})"
            dom = self.domain
        else:
            return NotImplemented
        if swap:
            a, b = b, a
        f = SymbolicField(op(a, b), curve, dom, name)
        return f

    def __add__(self, o):
        return self._binop(o, lambda a, b: a + b, "+")

    def __radd__(self, o):
        return self._binop(o, lambda a, b: a + b, "+", swap=True)

    def __sub__(self, o):
        return self._binop(o, lambda a, b: a - b, "-")

    def __rsub__(self, o):
        return self._binop(o, lambda a, b: a - b, "-", swap=True)

    def __mul__(self, o):
        return self._binop(o, lambda a, b: a * b, "*")

    def __rmul__(self, o):
        return self._binop(o, lambda a, b: a * b, "*", swap=True)

    def __truediv__(self, o):
        return self._binop(o, lambda a, b: a / b, "/")

    def __rtruediv__(self, o):
        return self._binop(o, lambda a, b: a / b, "/", swap=True)

    def __neg__(self):
        return self._wrap(-self.expr, f"-{self.name}")

    def __pow__(self, p):
        return self._wrap(self.expr ** sp.sympify(p), f"{self.name}^{p}")

    def sqrt(self) -> "SymbolicField":
        return self._wrap(sp.sqrt(self.expr), f"sqrt({self.name})")

    def on(self, domain: Mesh2D) -> "SymbolicField":
        return SymbolicField(self.expr, self.curve, domain, self.name)

    def with_curve(self, curve: GraphCurve) -> "SymbolicField":
        return SymbolicField(self.expr, curve, self.domain, self.name)

    def is_zero(self) -> bool:
        return self.expr == 0


class CallableField(ScalarField):
    """Analytic field from user callables; gradient and Laplacian optional."""

    def __init__(self, value: Callable, grad: Callable | None = None, lap: Callable | None = None,
                 name: str = "callable", domain: Mesh2D | None = None):
        self._v, self._g, self._l = value, grad, lap
        self.name = name
        self.domain = domain

    def value(self, pts):
        return np.asarray(self._v(_as_points(pts)), dtype=complex)

    def gradient(self, pts):
        if self._g is None:
            return super().gradient(pts)
        return np.asarray(self._g(_as_points(pts)), dtype=complex)

    def laplacian(self, pts):
        if self._l is None:
            return super().laplacian(pts)
        return np.asarray(self._l(_as_points(pts)), dtype=complex)


class NodalField(ScalarField):
    """Piecewise-linear interpolant of nodal values on a structured Mesh2D."""

    def __init__(self, mesh: Mesh2D, values, name: str = "nodal",
                 analytic: ScalarField | None = None, check_tol: float = 1e-12):
        self.mesh = mesh
        self.domain = mesh
        self.values = np.asarray(values, dtype=complex)
        self.name = name
        if self.values.shape != (mesh.n_nodes,):
            raise DomainError("one value per node required")
        if analytic is not None:
            ref = analytic.value(mesh.nodes)
            scale = max(1.0, float(np.max(np.abs(ref))))
            if np.max(np.abs(ref - self.values)) > check_tol * scale:
                raise DomainError("nodal and analytic values disagree at nodes")
        p = mesh.nodes[mesh.triangles]
        u, v = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        # inverse of [u v] per triangle for barycentric coordinates
        self._inv = np.stack([np.stack([v[:, 1], -v[:, 0]], -1),
                              np.stack([-u[:, 1], u[:, 0]], -1)], 1) / det[:, None, None]
        f = self.values[mesh.triangles]
        self._tri_grad = np.einsum("tij,ti->tj", self._inv, np.stack([f[:, 1] - f[:, 0], f[:, 2] - f[:, 0]], 1))

    @classmethod
    def from_field(cls, f: ScalarField, mesh: Mesh2D) -> "NodalField":
        return cls(mesh, f.value(mesh.nodes), name=f"P1({f.name})", analytic=f)

    def locate(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Triangle index and barycentric (l1, l2) for each point (nearest triangle)."""
        pts = _as_points(pts)
        m = self.mesh
        x0, x1, y0, y1 = m.ref_bounds
        ny = int(round((y1 - y0) / (m.ref_nodes[1, 1] - m.ref_nodes[0, 1])))
        nx = m.n_nodes // (ny + 1) - 1
        if hasattr(m.chart, "g"):
            ref = np.column_stack([pts[:, 0], pts[:, 1] - m.chart.g(pts[:, 0]) + m.chart.eps])
        else:
            ref = pts
        i = np.clip(((ref[:, 0] - x0) / (x1 - x0) * nx).astype(int), 0, nx - 1)
        j = np.clip(((ref[:, 1] - y0) / (y1 - y0) * ny).astype(int), 0, ny - 1)
        cell = i * ny + j
        ncell = nx * ny
        best_t = np.empty(pts.shape[0], dtype=np.int64)
        best_l = np.empty((pts.shape[0], 2))
        best_s = np.full(pts.shape[0], -np.inf)
        for t in (cell, cell + ncell):
            a = m.nodes[m.triangles[t, 0]]
            lam = np.einsum("nij,nj->ni", self._inv[t], pts - a)
            score = np.minimum(np.minimum(lam[:, 0], lam[:, 1]), 1 - lam.sum(1))
            better = score > best_s
            best_t[better], best_l[better], best_s[better] = t[better], lam[better], score[better]
        return best_t, best_l

    def value(self, pts):
        t, lam = self.locate(pts)
        f = self.values[self.mesh.triangles[t]]
        return f[:, 0] + lam[:, 0] * (f[:, 1] - f[:, 0]) + lam[:, 1] * (f[:, 2] - f[:, 0])

    def gradient(self, pts):
        t, _ = self.locate(pts)
        return self._tri_grad[t]


def constant(c, domain: Mesh2D | None = None) -> SymbolicField:
    return SymbolicField(sp.sympify(c), None, domain, f"const({c})")


def coordinate(i: int) -> SymbolicField:
    return SymbolicField((X1, X2)[i], None, None, f"x{i + 1}")


def plane_wave(k: float, direction) -> SymbolicField:
    if not k > 0:
        raise DomainError("k must be positive")
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    expr = sp.exp(sp.I * sp.Float(k) * (sp.Float(d[0]) * X1 + sp.Float(d[1]) * X2))
    return SymbolicField(expr, None, None, f"plane_wave(k={k:g})")


def top_offset(end: ProductEnd2D) -> SymbolicField:
    """d_plus = gamma(x1) - x2, vanishing on the top graph."""
    return SymbolicField(G0(X1) - X2, end.curve, None, "d+")


def bottom_offset(end: ProductEnd2D) -> SymbolicField:
    """d_minus = x2 - gamma(x1) + eps, vanishing on the bottom graph."""
    return SymbolicField(X2 - G0(X1) + sp.Float(end.eps), end.curve, None, "d-")


def make_zero_cauchy_family(end: ProductEnd2D, eps: float, alpha1, g: SymbolicField | None = None,
                            order: int = 2) -> SymbolicField:
    """Field with w = 0 on both lateral graphs and sup|w| ~ eps^(1+alpha1).

    ``order=2`` (default): w = 4 eps^(alpha1-3) d+^2 d-^2 g, which also has
    vanishing gradient on the lateral graphs.
    ``order=1``: w = eps^(alpha1-1) d+ d- g; only the trace vanishes.
    For a flat strip and g = 1 both give sup|w| = eps^(1+alpha1)/4.
    """
    if abs(eps - end.eps) > 1e-15 * max(1.0, eps):
        raise DomainError("eps must match the end thickness")
    a1 = float(alpha1)
    dp, dm = top_offset(end), bottom_offset(end)
    if order == 2:
        base = (dp * dm) ** 2 * (4 * eps ** (a1 - 3))
    elif order == 1:
        base = dp * dm * eps ** (a1 - 1)
    else:
        raise DomainError("order must be 1 or 2")
    w = base if g is None else base * g
    w.name = f"zero_cauchy(eps={eps:g},order={order})"
    return w


def make_tbc_partner(end: ProductEnd2D, v: SymbolicField, h1: SymbolicField,
                     h2: SymbolicField) -> SymbolicField:
    """u with u = v and h1 du/dnu = h2 dv/dnu on both lateral graphs.

    u = v + (d+ d- / eps) Q with Q chosen so the normal derivative of the
    correction equals ((h2 - h1)/h1) dv/dnu on top and bottom.
    """
    eps = end.eps
    dp, dm = top_offset(end), bottom_offset(end)
    gp = SymbolicField(G1(X1), end.curve, None, "gamma'")
    sigma = (dm - dp) / eps
    dv_n = v.partial(0) * (-gp) + v.partial(1)
    Q = -((h2 - h1) / h1) * sigma * dv_n / (1 + gp * gp)
    u = v + dp * dm / eps * Q
    u.name = f"tbc_partner({v.name})"
    return u


# --------------------------------------------------------------------------
# Hölder estimates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HolderEstimate:
    alpha: float
    sup_norm: float
    seminorm: float
    pairs: int
    seed: int
    of: str = "value"

    @property
    def norm(self) -> float:
        return self.sup_norm + self.seminorm


def _pair_points(domain: Mesh2D, pairs: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Nested pair sampler: row i depends only on the i-th block of the stream.

    Even rows pair a point with a partner within one short-side length in the
    reference frame (resolves the thin direction); odd rows pair two
    independent uniform points.
    """
    rng = np.random.default_rng(seed)
    U = rng.random((pairs, 4))
    x0, x1, y0, y1 = domain.ref_bounds
    w_loc = min(x1 - x0, y1 - y0)
    a = U[:, :2]
    b = U[:, 2:].copy()
    local = np.arange(pairs) % 2 == 0
    xi = x0 + (x1 - x0) * a[:, 0]
    xi_b = np.clip(xi + (2 * U[:, 2] - 1) * w_loc, x0, x1)
    b[local, 0] = ((xi_b - x0) / (x1 - x0))[local]
    return domain.sample_points(a), domain.sample_points(b)


def holder_norm_estimate(f: ScalarField, alpha: float, pairs: int = 10_000, seed: int = 42,
                         domain: Mesh2D | None = None, of: str = "value") -> HolderEstimate:
    """Sampled Hölder seminorm max |f(x)-f(y)| / |x-y|^alpha (a lower bound).

    ``of="gradient"`` applies the estimate to the gradient vector field.
    """
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    if pairs < 1:
        raise DomainError("pairs must be positive")
    dom = domain or f.domain
    if dom is None:
        raise DomainError("a sampling domain (Mesh2D) is required")
    p, q = _pair_points(dom, pairs, seed)
    if of == "value":
        fp, fq = f.value(p), f.value(q)
        diff = np.abs(fp - fq)
        sup = max(np.max(np.abs(fp)), np.max(np.abs(fq)))
    elif of == "gradient":
        fp, fq = f.gradient(p), f.gradient(q)
        diff = np.linalg.norm(fp - fq, axis=1)
        sup = max(np.max(np.linalg.norm(fp, axis=1)), np.max(np.linalg.norm(fq, axis=1)))
    else:
        raise DomainError("of must be 'value' or 'gradient'")
    dist = np.linalg.norm(p - q, axis=1)
    ok = dist > 0
    semi = float(np.max(diff[ok] / dist[ok] ** alpha)) if np.any(ok) else 0.0
    return HolderEstimate(float(alpha), float(sup), semi, int(pairs), int(seed), of)


def c1_alpha_estimate(f: ScalarField, alpha: float, pairs: int = 10_000, seed: int = 42,
                      domain: Mesh2D | None = None) -> float:
    """sup|f| + sup|grad f| + sampled alpha-seminorm of grad f."""
    v = holder_norm_estimate(f, 1.0, pairs, seed, domain, "value")
    g = holder_norm_estimate(f, alpha, pairs, seed, domain, "gradient")
    return v.sup_norm + g.sup_norm + g.seminorm


# --------------------------------------------------------------------------
# traces
# --------------------------------------------------------------------------

@dataclass
class Trace:
    tag: str
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray

    def __iter__(self):
        return iter((self.dirichlet, self.neumann))


def cauchy_trace(f: ScalarField, tag: str, mesh: Mesh2D | None = None) -> Trace:
    mesh = mesh or f.domain
    if mesh is None:
        raise DomainError("a mesh carrying the tag is required")
    pts, nu, w, _ = mesh.boundary_quadrature([tag])
    # arclength: cumulative edge length plus local offset along each edge
    k = 5
    edge_len = w.reshape(-1, k).sum(1)
    start = np.concatenate([[0.0], np.cumsum(edge_len)[:-1]])
    from .quadrature import GAUSS5
    s = (start[:, None] + GAUSS5[0][None, :] * edge_len[:, None]).reshape(-1)
    return Trace(tag, pts, nu, w, s, f.value(pts), f.normal_derivative(pts, nu))


# --------------------------------------------------------------------------
# coefficients and the Liouville transform
# --------------------------------------------------------------------------

@dataclass
class CoefficientSet:
    h1: SymbolicField
    h2: SymbolicField
    M1: float = math.inf
    M2: float = 0.0
    alpha3: float = 2.0

    def validate(self, pts) -> None:
        for name, h in (("h1", self.h1), ("h2", self.h2)):
            vals = h.value(pts)
            if np.any(np.abs(vals.imag) > 1e-12) or np.any(vals.real <= 0):
                raise DomainError(f"{name} must be real and positive")
            if np.any(vals.real < self.M2 - 1e-12) or np.any(vals.real > self.M1 + 1e-12):
                raise DomainError(f"{name} leaves [M2, M1]")


@dataclass
class LiouvilleResult:
    u_t: SymbolicField
    v_t: SymbolicField
    w_t: SymbolicField
    B: SymbolicField
    A: SymbolicField

    def __iter__(self):
        return iter((self.u_t, self.v_t, self.w_t, (self.B, self.A)))


def _potential(h: SymbolicField) -> tuple[object, object]:
    gx, gy = h.partial_expr(0), h.partial_expr(1)
    grad2 = gx**2 + gy**2
    return sp.Rational(1, 4) * grad2 / h.expr**2, sp.Rational(1, 2) * h.laplacian_expr / h.expr


def liouville_transform(u: SymbolicField, v: SymbolicField, coeffs: CoefficientSet,
                        check_pts=None) -> LiouvilleResult:
    """u~ = h1^(1/2) u, v~ = h2^(1/2) v, w~ = u~ - v~ and the potentials B, A."""
    h1, h2 = coeffs.h1, coeffs.h2
    if check_pts is None and (u.domain is not None or v.domain is not None):
        check_pts = (u.domain or v.domain).nodes
    if check_pts is not None:
        coeffs.validate(check_pts)
    for h in (h1, h2):
        if h.expr.is_number and not (sp.re(h.expr) > 0):
            raise DomainError("coefficients must be positive")
    ut = h1.sqrt() * u
    vt = h2.sqrt() * v
    wt = ut - vt
    q1, l1 = _potential(h1)
    q2, l2 = _potential(h2)
    curve = h1._merge_curve(h2)
    B = SymbolicField(q1 - l1, curve, u.domain, "B")
    A = SymbolicField(q1 - q2 + l2 - l1, curve, u.domain, "A")
    ut.name, vt.name, wt.name = "u~", "v~", "w~"
    return LiouvilleResult(ut, vt, wt, B, A)


# --------------------------------------------------------------------------
# dumps
# --------------------------------------------------------------------------

def write_field_csv(f: ScalarField, mesh: Mesh2D, fh: TextIO) -> None:
    vals = f.value(mesh.nodes)
    fh.write("x,y,re,im\n")
    for (x, y), z in zip(mesh.nodes, vals):
        fh.write(f"{x:.17g},{y:.17g},{z.real:.17g},{z.imag:.17g}\n")


def write_trace_csv(tr: Trace, fh: TextIO) -> None:
    fh.write("s,re_d,im_d,re_n,im_n\n")
    for s, d, n in zip(tr.s, tr.dirichlet, tr.neumann):
        fh.write(f"{s:.17g},{d.real:.17g},{d.imag:.17g},{n.real:.17g},{n.imag:.17g}\n")
