"""Complex geometrical optics (CGO) solutions u0(x) = exp(rho . x).

With ``rho = s (d + i d_perp)`` and ``d``, ``d_perp`` orthonormal, ``rho . rho = 0``
so ``u0`` is harmonic. Choosing ``d`` inside the dual cone of a domain seen from
the origin makes ``|u0(x)| = exp(s d.x) <= exp(-s delta |x|)`` there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, SectorError


@dataclass(frozen=True)
class CgoParams:
    s: float
    d: tuple[float, ...]
    d_perp: tuple[float, ...]
    n: int = 2

    def __post_init__(self):
        d, dp = np.asarray(self.d, float), np.asarray(self.d_perp, float)
        if d.shape != (self.n,) or dp.shape != (self.n,):
            raise DomainError("direction vectors must have length n")
        if abs(d @ d - 1) > 1e-14 or abs(dp @ dp - 1) > 1e-14 or abs(d @ dp) > 1e-14:
            raise DomainError("d and d_perp must be orthonormal")
        if self.s < 0:
            raise DomainError("s must be nonnegative")

    @classmethod
    def from_direction(cls, s: float, d) -> "CgoParams":
        """d_perp = (-d2, d1) in 2D, or (-d2, d1, 0) in 3D (d3 must vanish)."""
        d = np.asarray(d, dtype=float)
        d = d / np.linalg.norm(d)
        if d.size == 2:
            dp = np.array([-d[1], d[0]])
        elif d.size == 3:
            if abs(d[2]) > 1e-14:
                raise DomainError("the 3D variant needs d in the x1-x2 plane")
            dp = np.array([-d[1], d[0], 0.0])
        else:
            raise DomainError("dimension must be 2 or 3")
        return cls(float(s), tuple(map(float, d)), tuple(map(float, dp)), d.size)

    @property
    def rho(self) -> np.ndarray:
        return self.s * (np.asarray(self.d) + 1j * np.asarray(self.d_perp))


def cgo_eval(p: CgoParams, x) -> np.ndarray | complex:
    x = np.asarray(x, dtype=float)
    d, dp = np.asarray(p.d), np.asarray(p.d_perp)
    re = p.s * (x @ d)
    im = p.s * (x @ dp)
    val = np.exp(re) * (np.cos(im) + 1j * np.sin(im))
    return complex(val) if np.ndim(val) == 0 else val


def cgo_grad(p: CgoParams, x) -> np.ndarray:
    u = np.asarray(cgo_eval(p, x))
    return u[..., None] * p.rho


def cgo_laplacian(p: CgoParams, x) -> np.ndarray:
    # rho . rho in floating point; zero up to rounding
    return np.asarray(cgo_eval(p, x)) * complex(p.rho @ p.rho)


@dataclass(frozen=True)
class DecayCertificate:
    d: tuple[float, float]
    delta: float
    r_min: float
    theta1: float
    theta2: float
    phi: float

    def to_dict(self) -> dict:
        return {"d": list(self.d), "delta": self.delta, "r_min": self.r_min,
                "theta1": self.theta1, "theta2": self.theta2, "phi": self.phi}

    def holds(self, x, tol: float = 1e-12) -> bool:
        x = np.atleast_2d(np.asarray(x, float))
        r = np.linalg.norm(x, axis=1)
        return bool(np.all(x @ np.asarray(self.d) <= -self.delta * r + tol))


def select_direction(vertices) -> DecayCertificate:
    """Negated bisector of the angular sector spanned by ``vertices``."""
    x = np.atleast_2d(np.asarray(vertices, dtype=float))
    r = np.linalg.norm(x, axis=1)
    if np.any(r <= 0):
        raise SectorError("the origin belongs to the domain")
    th = np.sort(np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi))
    if th.size == 1:
        start, width = th[0], 0.0
    else:
        gaps = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
        i = int(np.argmax(gaps))
        width = 2 * np.pi - gaps[i]
        start = th[(i + 1) % th.size]
    if width >= np.pi:
        raise SectorError(f"sector width {width:.6f} >= pi (origin in or on the hull)")
    mid = start + width / 2
    d = -np.array([math.cos(mid), math.sin(mid)])
    delta = float(np.min(-(x @ d) / r))
    if not delta > 0:
        raise SectorError("no positive decay margin")
    t1 = math.remainder(start, 2 * math.pi)
    return DecayCertificate(tuple(map(float, d)), delta, float(r.min()), t1, float(t1 + width),
                            math.atan2(d[1], d[0]))


def integrate_cgo_rect(p: CgoParams, rect) -> complex:
    """Closed-form integral of u0 over the axis-aligned box ``[(a1, b1), (a2, b2), ...]``."""
    total = 1.0 + 0j
    for rj, (a, b) in zip(p.rho, rect):
        length = b - a
        z = rj * length
        if abs(z) < 1e-8:
            total *= np.exp(rj * a) * length * (1 + z / 2 + z * z / 6 + z**3 / 24)
        else:
            total *= (np.exp(rj * b) - np.exp(rj * a)) / rj
    return complex(total)


def integrate_cgo_mesh(p: CgoParams, mesh) -> complex:
    return complex(mesh.integrate(lambda pts: cgo_eval(p, pts)))


def _check_s(s: float) -> None:
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")


def incomplete_gamma_lower(s: float, x: float) -> float:
    """gamma_0(s, x) = int_0^x exp(-t) t^(s-1) dt."""
    _check_s(s)
    if x < 0:
        raise DomainError("x must be nonnegative")
    return float(special.gammainc(s, x) * special.gamma(s))


def incomplete_gamma_upper(s: float, x: float) -> float:
    """Gamma_0(s, x) = int_x^inf exp(-t) t^(s-1) dt, checked against 2^s Gamma(s) e^(-x/2)."""
    _check_s(s)
    if x < 0:
        raise DomainError("x must be nonnegative")
    val = float(special.gammaincc(s, x) * special.gamma(s))
    bound = 2.0**s * special.gamma(s) * math.exp(-x / 2)
    if val > bound * (1 + 1e-12):
        raise ArithmeticError(f"upper incomplete gamma bound violated: {val} > {bound}")
    return val
