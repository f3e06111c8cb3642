"""2D acoustic medium scattering by the Lippmann–Schwinger equation

    w = w^i + k² ∫ Φ(x - y) (q(y) - 1) w(y) dy,    Φ(r) = (i/4) H0^(1)(k r),

discretized by midpoint collocation on a uniform grid. The singular self cell
is replaced by the disk of equal area (radius a = h/√π) where the integral of Φ
is known in closed form:

    k² ∫_{|y|<a} Φ = (iπ/2) k a H1^(1)(k a) - 1.

The discrete operator is a convolution; it is applied by zero-padded FFT and
inverted with GMRES. Far field: w_∞(x̂) = c₂ k² ∫ e^{-ik x̂·y} (q-1) w dy with
c₂ = e^{iπ/4}/√(8πk), so w^s ≈ e^{ikr} w_∞ / √r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, TextIO

import numpy as np
from scipy import fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.special import hankel1, j1

from .errors import ConventionError, MediumError, SolverError, SweepError
from .estimates import SweepRecord, fit_decay_exponent
from .fields import CallableField, ScalarField, plane_wave

CONVENTION = "c2=exp(i*pi/4)/sqrt(8*pi*k)"


@dataclass(frozen=True)
class MediumGrid:
    origin: tuple[float, float]
    h: float
    nx: int
    ny: int
    q: np.ndarray
    k: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex)
        object.__setattr__(self, "q", q)
        if q.shape != (self.nx, self.ny):
            raise MediumError(f"q has shape {q.shape}, expected {(self.nx, self.ny)}")
        if np.any(q.real <= 0) or np.any(q.imag < 0):
            raise MediumError("need Re q > 0 and Im q >= 0 in every cell")
        ring = np.concatenate([q[0], q[-1], q[:, 0], q[:, -1]])
        if np.any(ring != 1):
            raise MediumError("q must equal 1 on the grid boundary ring")
        if not self.k > 0:
            raise MediumError("k must be positive")

    @classmethod
    def from_function(cls, qfun: Callable[[np.ndarray, np.ndarray], np.ndarray], k: float,
                      half_width: float, n: int, center=(0.0, 0.0), subsample: int = 1) -> "MediumGrid":
        """Square grid of n×n cells on center ± half_width; q averaged over subsample² points."""
        h = 2 * half_width / n
        origin = (center[0] - half_width, center[1] - half_width)
        off = (np.arange(subsample) + 0.5) / subsample * h
        cx = origin[0] + h * np.arange(n)
        cy = origin[1] + h * np.arange(n)
        X = cx[:, None, None, None] + off[None, None, :, None]
        Y = cy[None, :, None, None] + off[None, None, None, :]
        X, Y = np.broadcast_arrays(X, Y)
        q = np.asarray(qfun(X, Y), dtype=complex).mean(axis=(2, 3))
        q[0], q[-1], q[:, 0], q[:, -1] = 1, 1, 1, 1
        return cls(origin, h, n, n, q, k)

    def with_k(self, k: float) -> "MediumGrid":
        return replace(self, k=k)

    @property
    def centers(self) -> np.ndarray:
        cx = self.origin[0] + self.h * (np.arange(self.nx) + 0.5)
        cy = self.origin[1] + self.h * (np.arange(self.ny) + 0.5)
        X, Y = np.meshgrid(cx, cy, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def radius(self) -> float:
        """Smallest R centred at the grid centre with supp(q-1) inside B_R."""
        mask = (self.q != 1).ravel()
        if not mask.any():
            return 0.0
        c = np.array([self.origin[0] + self.h * self.nx / 2, self.origin[1] + self.h * self.ny / 2])
        pts = self.centers[mask] - c
        return float(np.max(np.linalg.norm(pts, axis=1)) + self.h / math.sqrt(2))


def phi_kernel(k: float, r) -> np.ndarray:
    return 0.25j * hankel1(0, k * np.asarray(r))


def phi_kernel_3d(k: float, r) -> np.ndarray:
    """e^{ikr}/(4πr); defined for completeness, no 3D solver uses it."""
    r = np.asarray(r, dtype=float)
    return np.exp(1j * k * r) / (4 * math.pi * r)


def point_source(k: float, source) -> CallableField:
    """Φ(x, x_s); the source must lie outside supp(q-1)."""
    xs = np.asarray(source, dtype=float)
    return CallableField(lambda p: phi_kernel(k, np.linalg.norm(p - xs, axis=-1)),
                         name=f"point_source(k={k:g})")


def self_cell(k: float, h: float) -> complex:
    """k² times the integral of Φ over the equal-area disk of the cell."""
    a = h / math.sqrt(math.pi)
    return complex(0.5j * math.pi * k * a * hankel1(1, k * a) - 1.0)


class LSOperator:
    """x -> k² Σ_j Φ(x_i - y_j) σ_j h², with σ = (q-1) w, applied by FFT."""

    def __init__(self, medium: MediumGrid):
        self.m = medium
        nx, ny, h, k = medium.nx, medium.ny, medium.h, medium.k
        ix = np.arange(-(nx - 1), nx)
        iy = np.arange(-(ny - 1), ny)
        R = h * np.hypot(ix[:, None], iy[None, :])
        with np.errstate(all="ignore"):
            K = k * k * h * h * phi_kernel(k, R)
        K[nx - 1, ny - 1] = self_cell(k, h)
        self.kernel = K
        self.shape = (2 * nx - 1, 2 * ny - 1)
        self.fshape = tuple(sfft.next_fast_len(s) for s in self.shape)
        self._kf = sfft.fft2(K, self.fshape)

    def convolve(self, sigma: np.ndarray) -> np.ndarray:
        nx, ny = self.m.nx, self.m.ny
        s = sfft.ifft2(sfft.fft2(sigma.reshape(nx, ny), self.fshape) * self._kf)
        return s[nx - 1:2 * nx - 1, ny - 1:2 * ny - 1].reshape(-1)

    def convolve_direct(self, sigma: np.ndarray) -> np.ndarray:
        """Direct summation; O(N²), used as an oracle on small grids."""
        nx, ny = self.m.nx, self.m.ny
        idx = np.indices((nx, ny)).reshape(2, -1).T
        out = np.zeros(nx * ny, dtype=complex)
        for t, (i, j) in enumerate(idx):
            out[t] = np.sum(self.kernel[i - idx[:, 0] + nx - 1, j - idx[:, 1] + ny - 1] * sigma)
        return out

    def evaluate_at(self, pts: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        """Scattered field k²∫Φ σ at points away from the grid cells."""
        c = self.m.centers
        k, h = self.m.k, self.m.h
        out = np.empty(len(pts), dtype=complex)
        for i, p in enumerate(np.atleast_2d(pts)):
            r = np.linalg.norm(c - p, axis=1)
            out[i] = k * k * h * h * np.sum(phi_kernel(k, r) * sigma)
        return out


@dataclass
class LSSolution:
    medium: MediumGrid
    w: np.ndarray
    incident: np.ndarray
    iterations: int
    residual: float

    @property
    def scattered(self) -> np.ndarray:
        return self.w - self.incident

    @property
    def sigma(self) -> np.ndarray:
        return (self.medium.q.ravel() - 1) * self.w


def solve_ls(medium: MediumGrid, incident: ScalarField | None = None, direction=(1.0, 0.0),
             rtol: float = 1e-8, restart: int = 60, maxiter: int = 2000) -> LSSolution:
    """Total field at cell centres."""
    if incident is None:
        incident = plane_wave(medium.k, direction)
    wi = np.asarray(incident.value(medium.centers), dtype=complex)
    if not np.all(np.isfinite(wi[medium.q.ravel() != 1])):
        raise MediumError("incident field is singular inside supp(q-1)")
    contrast = medium.q.ravel() - 1
    if not np.any(contrast):
        return LSSolution(medium, wi.copy(), wi, 0, 0.0)
    op = LSOperator(medium)
    n = wi.size
    A = LinearOperator((n, n), matvec=lambda x: x - op.convolve(contrast * x), dtype=complex)
    count = [0]

    def cb(_):
        count[0] += 1

    w, info = gmres(A, wi, rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter,
                    callback=cb, callback_type="pr_norm")
    res = float(np.linalg.norm(A @ w - wi) / np.linalg.norm(wi))
    if info != 0 or res > 10 * rtol:
        raise SolverError(f"GMRES did not converge (info={info}, residual={res:.2e})")
    return LSSolution(medium, w, wi, count[0], res)


@dataclass
class FarField:
    theta: np.ndarray
    values: np.ndarray
    direction: tuple[float, float]
    k: float
    convention: str = CONVENTION

    @property
    def l2_norm(self) -> float:
        return float(math.sqrt(2 * math.pi / len(self.theta) * np.sum(np.abs(self.values) ** 2)))

    def write_csv(self, fh: TextIO) -> None:
        fh.write("theta,re,im\n")
        for t, z in zip(self.theta, self.values):
            fh.write(f"{t:.17g},{z.real:.17g},{z.imag:.17g}\n")


def c2(k: float) -> complex:
    return complex(np.exp(0.25j * math.pi) / math.sqrt(8 * math.pi * k))


def far_field(medium: MediumGrid, w: LSSolution | np.ndarray, n_theta: int = 64,
              theta: np.ndarray | None = None, direction=(1.0, 0.0)) -> FarField:
    if isinstance(w, LSSolution):
        wv = w.w
    else:
        wv = np.asarray(w)
    if theta is None:
        if n_theta < 32:
            raise ValueError("n_theta must be at least 32")
        theta = 2 * math.pi * np.arange(n_theta) / n_theta
    k, h = medium.k, medium.h
    sigma = (medium.q.ravel() - 1) * wv
    xhat = np.column_stack([np.cos(theta), np.sin(theta)])
    phase = np.exp(-1j * k * (xhat @ medium.centers.T))
    vals = c2(k) * k * k * h * h * (phase @ sigma)
    return FarField(np.asarray(theta), vals, tuple(direction), k)


def radiated_check(sol: LSSolution, ff_dirs: np.ndarray, r: float | None = None) -> float:
    """max |w^s(r x̂) √r e^{-ikr} - w_∞(x̂)| / max|w_∞| at r = 50/k."""
    m = sol.medium
    k = m.k
    c = np.array([m.origin[0] + m.h * m.nx / 2, m.origin[1] + m.h * m.ny / 2])
    r = 50 / k if r is None else r
    xhat = np.column_stack([np.cos(ff_dirs), np.sin(ff_dirs)])
    op = LSOperator.__new__(LSOperator)
    op.m = m
    ws = op.evaluate_at(c + r * xhat, sol.sigma)
    ff = far_field(m, sol, theta=ff_dirs)
    # the far field is referenced to the origin; shift phase to the grid centre
    approx = ws * math.sqrt(r) * np.exp(-1j * k * r) * np.exp(-1j * k * (xhat @ c))
    return float(np.max(np.abs(approx - ff.values)) / np.max(np.abs(ff.values)))


def born_disk_far_field(k: float, radius: float, contrast: float, theta: np.ndarray,
                        direction=(1.0, 0.0)) -> np.ndarray:
    """Born far field of a homogeneous disk at the origin (closed form)."""
    d = np.asarray(direction, float)
    xhat = np.column_stack([np.cos(theta), np.sin(theta)])
    kappa = k * np.linalg.norm(xhat - d, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ft = np.where(kappa > 1e-12, 2 * math.pi * radius * j1(kappa * radius) / kappa,
                      math.pi * radius**2)
    return c2(k) * k * k * contrast * ft


def compare_far_fields(a: FarField, b: FarField) -> float:
    if a.convention != b.convention:
        raise ConventionError(f"{a.convention!r} vs {b.convention!r}")
    if len(a.theta) != len(b.theta) or not np.allclose(a.theta, b.theta):
        raise ConventionError("far fields sampled at different angles")
    if not np.allclose(a.direction, b.direction) or a.k != b.k:
        raise ConventionError("different incident direction or wavenumber")
    na = np.linalg.norm(a.values)
    diff = np.linalg.norm(a.values - b.values)
    if na == 0:
        return 0.0 if diff == 0 else math.inf
    return float(diff / na)


# --------------------------------------------------------------------------
# thin scatterers and sweeps
# --------------------------------------------------------------------------

def thin_rectangle_medium(eps: float, q0: complex, k: float, length: float = 1.0,
                          half_width: float = 0.75, n: int = 128,
                          center=(0.0, 0.0)) -> MediumGrid:
    """Rectangle [-length/2, length/2] × [-eps/2, eps/2] with q = q0 inside.

    Cells cut by the rectangle get the exact area fraction, so the discrete
    scatterer area equals eps·length even when eps spans only a few cells.
    """
    h = 2 * half_width / n
    origin = (center[0] - half_width, center[1] - half_width)
    lo = np.asarray(origin)[:, None] + h * np.arange(n)[None, :]

    def overlap(edges, a, b):
        return np.clip(np.minimum(edges + h, b) - np.maximum(edges, a), 0.0, None) / h

    fx = overlap(lo[0], -length / 2 + center[0], length / 2 + center[0])
    fy = overlap(lo[1], -eps / 2 + center[1], eps / 2 + center[1])
    q = 1 + (q0 - 1) * np.outer(fx, fy)
    return MediumGrid(origin, h, n, n, q, k)


def visibility_sweep(eps_list: Sequence[float], q0: complex = 2.0, k: float = 2.0,
                     direction=(0.6, 0.8), n: int = 128, n_theta: int = 64,
                     length: float = 1.0) -> SweepRecord:
    norms, normalized, flags = [], [], []
    for eps in eps_list:
        med = thin_rectangle_medium(eps, q0, k, length, n=n)
        sol = solve_ls(med, direction=direction)
        nrm = far_field(med, sol, n_theta, direction=direction).l2_norm
        norms.append(nrm)
        normalized.append(nrm / eps)
        flags.append(nrm < 1e-12)
    rec = SweepRecord(eps=[float(e) for e in eps_list], y=norms, label="visibility")
    if len(eps_list) >= 3 and min(norms) > 0:
        f = fit_decay_exponent(eps_list, norms, label="visibility")
        rec.tau_hat, rec.intercept, rec.r2 = f.tau_hat, f.intercept, f.r2
    spread = max(normalized) / min(normalized) if min(normalized) > 0 else math.inf
    rec.extra = {"area_normalized": normalized, "violations": flags, "spread": spread,
                 "visible": not any(flags)}
    return rec


def l2_ratio_on_ball(sol: LSSolution, radius: float) -> float:
    m = sol.medium
    c = np.array([m.origin[0] + m.h * m.nx / 2, m.origin[1] + m.h * m.ny / 2])
    inside = np.linalg.norm(m.centers - c, axis=1) < radius
    return float(np.linalg.norm(sol.w[inside]) / np.linalg.norm(sol.incident[inside]))


def boundedness_check(eps_list: Sequence[float], q0: complex = 2.0, k: float = 2.0,
                      direction=(0.6, 0.8), n: int = 128, length: float = 1.0) -> SweepRecord:
    """‖w‖/‖w^i‖ on B_{2R} for thin rectangles; grid covers B_{2R} with R = length/2."""
    if len(eps_list) < 4:
        raise SweepError("need at least 4 sweep points")
    R = length / 2 + max(eps_list)
    ratios = []
    for eps in eps_list:
        med = thin_rectangle_medium(eps, q0, k, length, half_width=2 * R + 0.05, n=n)
        sol = solve_ls(med, direction=direction)
        ratios.append(l2_ratio_on_ball(sol, 2 * R))
    f = fit_decay_exponent(eps_list, ratios, label="boundedness")
    f.extra = {"C_fit": max(ratios), "flat": abs(f.tau_hat) <= 0.1, "R": R}
    return f


def write_medium_csv(m: MediumGrid, fh: TextIO) -> None:
    fh.write("origin_x origin_y h nx ny k\n")
    fh.write(f"{m.origin[0]:.17g} {m.origin[1]:.17g} {m.h:.17g} {m.nx} {m.ny} {m.k:.17g}\n")
    fh.write("i,j,re_q,im_q\n")
    for i in range(m.nx):
        for j in range(m.ny):
            z = m.q[i, j]
            fh.write(f"{i},{j},{z.real:.17g},{z.imag:.17g}\n")


def optical_theorem_defect(medium: MediumGrid, direction=(1.0, 0.0), n_theta: int = 256) -> float:
    """Relative gap in ‖w_∞‖² = √(8π/k) Im(e^{-iπ/4} w_∞(d)) for real q."""
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    sol = solve_ls(medium, direction=d)
    ff = far_field(medium, sol, n_theta, direction=d)
    fwd = far_field(medium, sol, theta=np.array([math.atan2(d[1], d[0])]), direction=d).values[0]
    rhs = math.sqrt(8 * math.pi / medium.k) * float(np.imag(np.exp(-0.25j * math.pi) * fwd))
    lhs = ff.l2_norm**2
    return abs(lhs - rhs) / abs(lhs)
