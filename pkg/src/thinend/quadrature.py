"""Fixed quadrature rules on reference elements."""
import numpy as np


def _tri7():
    # degree-5 Radon rule; barycentric rows (l0, l1, l2)
    a1, b1 = (6 - np.sqrt(15)) / 21, (9 + 2 * np.sqrt(15)) / 21
    a2, b2 = (6 + np.sqrt(15)) / 21, (9 - 2 * np.sqrt(15)) / 21
    w1, w2 = (155 - np.sqrt(15)) / 1200, (155 + np.sqrt(15)) / 1200
    lam = np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [b1, a1, a1], [a1, b1, a1], [a1, a1, b1],
        [b2, a2, a2], [a2, b2, a2], [a2, a2, b2],
    ])
    # weights normalized to sum 1 (multiply by triangle area)
    w = np.array([9 / 40, w1, w1, w1, w2, w2, w2])
    return lam, w


TRI7 = _tri7()

_gx, _gw = np.polynomial.legendre.leggauss(5)
# Gauss-Legendre on [0, 1]
GAUSS5 = (0.5 * (_gx + 1), 0.5 * _gw)


def gauss_interval(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w
