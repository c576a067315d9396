"""Special functions: segment exponential integral, Bessel/Hankel, point source.

Bessel/Hankel evaluation is delegated to scipy.special (validated against
extended-precision series oracles in the test suite).  ``phi0`` is
implemented here because a cancellation-safe complex (e^a - 1)/a is not
provided by numpy/scipy.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

__all__ = [
    "phi0",
    "bessel_j",
    "bessel_y",
    "hankel1",
    "fundamental_solution",
]

# Below this modulus the direct formula loses more than 1e-14 relative to
# cancellation; the degree-12 Taylor polynomial is accurate to < 2e-19
# relative there (next term 0.25^13/14!), so the branches overlap safely.
_PHI0_SMALL = 0.25

# Coefficients of sum_{k=0..12} a^k / (k+1)!, highest order first (Horner).
_PHI0_TAYLOR = np.array([1.0 / math.factorial(k + 1) for k in range(12, -1, -1)])


def phi0(a):
    """Evaluate (e^a - 1)/a, i.e. the integral of e^{a t} over t in [0, 1].

    Accepts complex scalars or arrays.  Near a = 0 a degree-12 Taylor
    polynomial is used, giving relative error below 1e-14 for all finite a.
    """
    a = np.asarray(a, dtype=np.complex128)
    scalar = a.ndim == 0
    a = np.atleast_1d(a)
    out = np.empty_like(a)
    small = np.abs(a) < _PHI0_SMALL
    if np.any(small):
        asm = a[small]
        acc = np.full_like(asm, _PHI0_TAYLOR[0])
        for c in _PHI0_TAYLOR[1:]:
            acc = acc * asm + c
        out[small] = acc
    big = ~small
    if np.any(big):
        ab = a[big]
        out[big] = (np.exp(ab) - 1.0) / ab
    return complex(out[0]) if scalar else out


def bessel_j(m: int, x) -> float:
    """Bessel function of the first kind J_m for integer order m >= 0."""
    if m < 0 or m != int(m):
        raise ValueError(f"order must be a nonnegative integer, got {m}")
    if m > 10_000:
        raise ValueError(f"order {m} exceeds the supported range (10000)")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be >= 0")
    out = _sp.jv(m, x)
    return float(out) if out.ndim == 0 else out


def bessel_y(m: int, x) -> float:
    """Bessel function of the second kind Y_m, m in {0, 1}, x > 0."""
    if m not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {m}")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("Y_m requires x > 0")
    out = _sp.yv(m, x)
    return float(out) if out.ndim == 0 else out


def hankel1(m: int, x) -> complex:
    """Hankel function of the first kind H_m^(1) = J_m + i Y_m, m in {0, 1}."""
    if m not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {m}")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("H_m^(1) requires x > 0")
    out = _sp.hankel1(m, x)
    return complex(out) if out.ndim == 0 else out


def fundamental_solution(x, s, kappa: float):
    """Outgoing point-source field (i/4) H_0^(1)(kappa |x - s|) and its gradient.

    ``x`` may be a single point (shape (2,)) or an array of points
    (..., 2); ``s`` is the source location.  Returns ``(value, gradient)``
    with shapes (...) and (..., 2).  Raises for x == s.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    scalar = x.ndim == 1
    pts = x.reshape(-1, 2)
    diff = pts - s[None, :]
    r = np.hypot(diff[:, 0], diff[:, 1])
    if np.any(r == 0.0):
        raise ValueError("field is singular at the source point")
    val = 0.25j * _sp.hankel1(0, kappa * r)
    radial = -0.25j * kappa * _sp.hankel1(1, kappa * r)
    grad = radial[:, None] * (diff / r[:, None])
    if scalar:
        return complex(val[0]), grad[0]
    shape = x.shape[:-1]
    return val.reshape(shape), grad.reshape(shape + (2,))
