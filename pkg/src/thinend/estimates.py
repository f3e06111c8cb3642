"""Explicit decay exponents, their feasibility constraints and log-log fits.

All exponent arithmetic is carried out with :class:`fractions.Fraction` so the
published rational values are reproduced exactly. Floating point enters only in
:func:`fit_decay_exponent`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ConstraintError, DomainError, FitError

Number = Fraction | int | float | str

TAU1_STATUS = "not specified"


def frac(x: Number) -> Fraction:
    """Convert ints, decimal strings, "p/q" strings and floats to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


@dataclass(frozen=True)
class ExponentParams:
    zeta: Fraction
    alpha1: Fraction
    alpha2: Fraction
    alpha3: Fraction
    alpha: Fraction
    beta: Fraction
    ell: Fraction
    m: Fraction
    n: int = 2

    def __post_init__(self):
        for name in ("zeta", "alpha1", "alpha2", "alpha3", "alpha", "beta", "ell", "m"):
            object.__setattr__(self, name, frac(getattr(self, name)))
        if self.n not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.n}")

    @classmethod
    def default(cls, n: int = 2, **overrides) -> "ExponentParams":
        """Reference parameter set: beta=-2/3 (n=2) or -3/4 (n=3), ell=m=7/9."""
        base = dict(
            zeta=Fraction(6, 7) if n == 2 else Fraction(5, 7),
            alpha1=Fraction(5, 6) if n == 2 else Fraction(39, 40),
            alpha3=Fraction(2),
            beta=Fraction(-2, 3) if n == 2 else Fraction(-3, 4),
            ell=Fraction(7, 9),
            m=Fraction(7, 9),
            n=n,
        )
        base.update({k: v for k, v in overrides.items() if v is not None})
        base.setdefault("alpha2", base["alpha1"])
        base.setdefault("alpha", base["alpha1"])
        return cls(**base)

    def with_(self, **changes) -> "ExponentParams":
        return replace(self, **changes)


def _constraint_table(p: ExponentParams, kind: str) -> list[tuple[str, bool]]:
    z, a1, a, b, l, m = p.zeta, p.alpha1, p.alpha, p.beta, p.ell, p.m
    rows = [
        ("0 < zeta < 1", 0 < z < 1),
        ("0 < alpha1 < 1", 0 < a1 < 1),
        ("0 < alpha < 1", 0 < a < 1),
        ("alpha3 >= 2", p.alpha3 >= 2),
        ("alpha1 <= alpha2", a1 <= p.alpha2),
        ("beta + ell > 0", b + l > 0),
        ("beta + m > 0", b + m > 0),
    ]
    if p.n == 2:
        rows += [
            ("ell < alpha1", l < a1),
            ("m > 1/2", m > Fraction(1, 2)),
            ("-1 < beta < -1/2", Fraction(-1) < b < Fraction(-1, 2)),
        ]
        if kind == "theorem1":
            rows.append(("1+(1-zeta*alpha1)*ell < -2*beta", 1 + (1 - z * a1) * l < -2 * b))
        else:
            lhs = max(1 + (1 - a) * l, 1 + (1 - a1) * l)
            rows.append(("max{1+(1-alpha)*ell, 1+(1-alpha1)*ell} < -2*beta", lhs < -2 * b))
    else:
        rows += [
            ("2/3 < m", m > Fraction(2, 3)),
            ("2/3 < ell", l > Fraction(2, 3)),
            ("ell < alpha1", l < a1),
            ("-1 < beta < -2/3", Fraction(-1) < b < Fraction(-2, 3)),
        ]
        if kind == "theorem1":
            rows.append(("2+(1-zeta*alpha1)*ell < -3*beta", 2 + (1 - z * a1) * l < -3 * b))
        else:
            lhs = max(2 + (1 - a) * l, 2 + (1 - a1) * l)
            rows.append(("max{2+(1-alpha)*ell, 2+(1-alpha1)*ell} < -3*beta", lhs < -3 * b))
    return rows


def check_constraints(p: ExponentParams, kind: str = "theorem1") -> list[str]:
    """Return the names of violated inequalities; an empty list means feasible.

    ``kind`` selects the theorem-level (``"theorem1"``) or corollary-level
    (``"corollary2"``) version of the CGO scale inequality.
    """
    if kind not in ("theorem1", "corollary2"):
        raise DomainError(f"unknown constraint kind {kind!r}")
    return [name for name, ok in _constraint_table(p, kind) if not ok]


def _finish(tau: Fraction, p: ExponentParams | None, kind: str, check: bool) -> Fraction:
    if check:
        bad = check_constraints(p, kind)
        if bad:
            raise ConstraintError(f"infeasible exponents: {', '.join(bad)}")
    if tau <= 0:
        raise ConstraintError(f"tau = {tau} is not positive")
    return tau


def tau_theorem1_2d(zeta: Number, alpha1: Number, check: bool = True) -> Fraction:
    z, a1 = frac(zeta), frac(alpha1)
    tau = min(Fraction(7, 9) * z * a1 - Fraction(4, 9), a1 - Fraction(7, 9),
              Fraction(1, 9), Fraction(1, 3))
    p = ExponentParams.default(2, zeta=z, alpha1=a1) if check else None
    return _finish(tau, p, "theorem1", check)


def tau_theorem1_3d(zeta: Number, alpha1: Number, check: bool = True) -> Fraction:
    z, a1 = frac(zeta), frac(alpha1)
    tau = min(Fraction(7, 9) * z * a1 - Fraction(19, 36), a1 - Fraction(7, 9),
              Fraction(1, 36), Fraction(1, 4))
    p = ExponentParams.default(3, zeta=z, alpha1=a1) if check else None
    return _finish(tau, p, "theorem1", check)


def tau_corollary2_2d(alpha: Number, alpha1: Number, check: bool = True) -> Fraction:
    a, a1 = frac(alpha), frac(alpha1)
    tau = min(Fraction(7, 9) * a - Fraction(4, 9), a1 - Fraction(4, 9), a1 - Fraction(7, 9),
              Fraction(7, 9) * a1 - Fraction(4, 9), Fraction(1, 9), Fraction(1, 3))
    p = ExponentParams.default(2, alpha=a, alpha1=a1) if check else None
    return _finish(tau, p, "corollary2", check)


def tau_corollary2_3d(alpha: Number, alpha1: Number, check: bool = True) -> Fraction:
    a, a1 = frac(alpha), frac(alpha1)
    tau = min(Fraction(7, 9) * a - Fraction(19, 36), Fraction(7, 9) * a1 - Fraction(19, 36),
              a1 - Fraction(19, 36), a1 - Fraction(7, 9), Fraction(1, 36), Fraction(1, 4))
    p = ExponentParams.default(3, alpha=a, alpha1=a1) if check else None
    return _finish(tau, p, "corollary2", check)


def tau_tilde(tau1: Number, tau2: Number) -> Fraction:
    t1, t2 = frac(tau1), frac(tau2)
    if t1 <= 0 or t2 <= 0:
        raise DomainError("tau values must be positive")
    return min(t1, t2)


@dataclass
class SweepRecord:
    eps: list[float]
    y: list[float]
    tau_hat: float = math.nan
    intercept: float = math.nan
    r2: float = math.nan
    label: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = {"eps": self.eps, "y": self.y, "tau_hat": self.tau_hat, "r2": self.r2,
             "label": self.label}
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SweepRecord":
        d = json.loads(text)
        return cls(eps=d["eps"], y=d["y"], tau_hat=d["tau_hat"], r2=d["r2"], label=d["label"])


def fit_decay_exponent(eps: Sequence[float] | Iterable[tuple[float, float]],
                       y: Sequence[float] | None = None, label: str = "") -> SweepRecord:
    """Least-squares slope of log y against log eps.

    Accepts either two sequences or a single iterable of ``(eps, y)`` pairs.
    The returned record lists the points in strictly decreasing eps.
    """
    if y is None:
        pairs = [(float(e), float(v)) for e, v in eps]
    else:
        pairs = [(float(e), float(v)) for e, v in zip(eps, y, strict=True)]
    if len(pairs) < 3:
        raise FitError("need at least 3 points")
    pairs.sort(key=lambda t: -t[0])
    e = np.array([t[0] for t in pairs])
    v = np.array([t[1] for t in pairs])
    if np.any(e <= 0) or np.any(np.diff(e) >= 0):
        raise FitError("eps must be positive and distinct")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise FitError("values must be positive for a log-log fit")
    lx, ly = np.log(e), np.log(v)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return SweepRecord(eps=e.tolist(), y=v.tolist(), tau_hat=float(slope),
                       intercept=float(icpt), r2=r2, label=label)


__all__ = [
    "ExponentParams", "SweepRecord", "TAU1_STATUS", "check_constraints", "fit_decay_exponent",
    "frac", "tau_corollary2_2d", "tau_corollary2_3d", "tau_theorem1_2d", "tau_theorem1_3d",
    "tau_tilde",
]

