"""Real-argument cylinder functions and their zeros.

Evaluation is delegated to the Cephes routines shipped with :mod:`scipy.special`
(the order-specific ``j0/j1/y0/y1`` kernels for orders 0 and 1, ``jv/yv``
otherwise). This module fixes the argument domain, applies the integer-order
reflection explicitly and builds derivatives, Hankel functions and zeros on
top of those kernels.

All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import bisect

MAX_ORDER = 120
MAX_ARGUMENT = 100.0
ZERO_XTOL = 1e-15


@dataclass(frozen=True)
class CylinderValue:
    """Bundle of J, Y, H^(1) and their derivatives at one (n, x)."""

    j: float
    y: float
    h1: complex
    dj: float
    dh1: complex


def _check_order(n):
    n = np.asarray(n)
    if not np.issubdtype(n.dtype, np.integer):
        if not np.all(np.equal(np.mod(n, 1), 0)):
            raise ValueError("Bessel order must be an integer")
        n = n.astype(int)
    if np.any(np.abs(n) > MAX_ORDER):
        raise ValueError(f"|order| must not exceed {MAX_ORDER}")
    return n


def _check_argument(x, *, strictly_positive):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    if strictly_positive:
        if np.any(x <= 0):
            raise ValueError("argument must be > 0 (logarithmic singularity at 0)")
    elif np.any(x < 0):
        raise ValueError("argument must be >= 0")
    return x


def _reflect(n, values):
    # C_{-n} = (-1)^n C_n for integer n
    return np.where((n < 0) & (np.abs(n) % 2 == 1), -values, values)


def _j_nonneg(n, x):
    if n.ndim == 0:
        if n == 0:
            return special.j0(x)
        if n == 1:
            return special.j1(x)
    return special.jv(n, x)


def _y_nonneg(n, x):
    if n.ndim == 0:
        if n == 0:
            return special.y0(x)
        if n == 1:
            return special.y1(x)
    return special.yv(n, x)


def bessel_j(n, x):
    """Bessel function of the first kind J_n(x) for integer n and x >= 0."""
    n = _check_order(n)
    x = _check_argument(x, strictly_positive=False)
    m = np.abs(n)
    return _reflect(n, _j_nonneg(m, x))[()]


def bessel_y(n, x):
    """Bessel function of the second kind Y_n(x) for integer n and x > 0."""
    n = _check_order(n)
    x = _check_argument(x, strictly_positive=True)
    m = np.abs(n)
    return _reflect(n, _y_nonneg(m, x))[()]


def hankel1(n, x):
    """Hankel function H_n^(1)(x) = J_n(x) + i Y_n(x), x > 0."""
    j = bessel_j(n, x)
    y = bessel_y(n, x)
    return j + 1j * y


def bessel_jp(n, x):
    """Derivative J_n'(x) = J_{n-1}(x) - (n/x) J_n(x); J_n'(0) handled exactly."""
    n = _check_order(n)
    x = _check_argument(x, strictly_positive=False)
    # J_n' = (J_{n-1} - J_{n+1}) / 2 avoids the 1/x at the origin
    return 0.5 * (_reflect(n - 1, _j_nonneg(np.abs(n - 1), x))
                  - _reflect(n + 1, _j_nonneg(np.abs(n + 1), x)))[()]


def bessel_yp(n, x):
    """Derivative Y_n'(x), x > 0."""
    n = _check_order(n)
    x = _check_argument(x, strictly_positive=True)
    return 0.5 * (_reflect(n - 1, _y_nonneg(np.abs(n - 1), x))
                  - _reflect(n + 1, _y_nonneg(np.abs(n + 1), x)))[()]


def hankel1p(n, x):
    """Derivative of H_n^(1) with respect to x."""
    return bessel_jp(n, x) + 1j * bessel_yp(n, x)


def cylinder(n: int, x: float) -> CylinderValue:
    j = float(bessel_j(n, x))
    y = float(bessel_y(n, x))
    dj = float(bessel_jp(n, x))
    return CylinderValue(j=j, y=y, h1=complex(j, y), dj=dj,
                         dh1=complex(dj, float(bessel_yp(n, x))))


def _nth_root(f, start, m, what):
    """m-th sign change of f on (start, MAX_ARGUMENT], refined by bisection."""
    step = 0.25  # zeros of J_n and J_n' are spaced by roughly pi
    a = start
    fa = f(a)
    found = 0
    while a < MAX_ARGUMENT:
        b = min(a + step, MAX_ARGUMENT)
        fb = f(b)
        if fa == 0.0:
            found += 1
            if found == m:
                return a
        elif fa * fb < 0:
            found += 1
            if found == m:
                return bisect(f, a, b, xtol=ZERO_XTOL, rtol=4 * np.finfo(float).eps,
                              maxiter=200)
        a, fa = b, fb
    raise ValueError(f"{what}: zero number {m} lies beyond x = {MAX_ARGUMENT}")


def bessel_j_zero(n: int, m: int) -> float:
    """m-th positive zero j_{n,m} of J_n (n >= 0, m >= 1).

    For a disk of radius a, k = j_{n,m}/a are the Dirichlet eigen-wavenumbers.
    """
    n = int(_check_order(n))
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    # j_{n,1} > n, so scanning from n (or just above 0) misses no zero
    return _nth_root(lambda x: float(bessel_j(n, x)), max(float(n), 1e-3), m,
                     f"J_{n}")


def bessel_dj_zero(n: int, m: int) -> float:
    """m-th positive zero j'_{n,m} of J_n' (Neumann eigen-wavenumbers of a disk).

    The trivial root x = 0 of J_0' is not counted.
    """
    n = int(_check_order(n))
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    if n == 0:
        return bessel_j_zero(1, m)  # J_0' = -J_1
    return _nth_root(lambda x: float(bessel_jp(n, x)), max(float(n), 1e-3), m,
                     f"J_{n}'")
