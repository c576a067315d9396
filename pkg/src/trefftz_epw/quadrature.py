"""Gauss-Legendre rules on segments and triangles, with uniform subdivision.

The triangle rule collapses a tensor Gauss-Legendre grid onto the simplex
(Duffy map).  With n points per direction it integrates polynomials of
total degree 2n - 2 exactly; all weights are positive and all nodes lie
strictly inside, so quadratures of nonnegative integrands stay nonnegative.
"""

from __future__ import annotations

import functools

import numpy as np

__all__ = [
    "gauss_legendre_01",
    "segment_rule",
    "triangle_rule",
    "subdivide_triangle",
    "triangle_points",
]


@functools.lru_cache(maxsize=128)
def gauss_legendre_01(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [0, 1]."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def segment_rule(p0, p1, n: int):
    """Quadrature points on the segment [p0, p1] with arclength weights."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    t, w = gauss_legendre_01(n)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    return pts, w * float(np.hypot(*(p1 - p0)))


@functools.lru_cache(maxsize=16)
def triangle_rule(n: int = 6):
    """Collapsed-Gauss rule on the reference triangle {x, y >= 0, x+y <= 1}.

    Returns barycentric-style reference coordinates (m, 2) and weights
    (m,) summing to 1/2; exact for total degree <= 2n - 2.
    """
    t, w = gauss_legendre_01(n)
    u = np.repeat(t, n)
    v = np.tile(t, n)
    wu = np.repeat(w, n)
    wv = np.tile(w, n)
    pts = np.column_stack((u, v * (1.0 - u)))
    weights = wu * wv * (1.0 - u)
    pts.flags.writeable = False
    weights.flags.writeable = False
    return pts, weights


def subdivide_triangle(tri: np.ndarray, levels: int) -> np.ndarray:
    """Uniform 4-way refinement of one triangle, ``levels`` times.

    ``tri`` is (3, 2); the result is (4^levels, 3, 2).
    """
    tris = np.asarray(tri, dtype=float)[None, :, :]
    for _ in range(levels):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
        tris = np.concatenate([
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, c], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ], axis=0)
    return tris


def triangle_points(tri: np.ndarray, levels: int = 0, n: int = 6):
    """Physical quadrature points/weights on a (possibly subdivided) triangle.

    Returns (pts (m, 2), weights (m,)); the weights include the Jacobian,
    so ``weights @ f(pts)`` approximates the area integral of f.
    """
    ref, wref = triangle_rule(n)
    tris = subdivide_triangle(np.asarray(tri, dtype=float), levels)
    a = tris[:, 0]
    eb = tris[:, 1] - tris[:, 0]
    ec = tris[:, 2] - tris[:, 0]
    # x = a + xi*(b-a) + eta*(c-a); |J| = 2*area of the subtriangle
    pts = (a[:, None, :]
           + ref[None, :, 0, None] * eb[:, None, :]
           + ref[None, :, 1, None] * ec[:, None, :])
    jac = np.abs(eb[:, 0] * ec[:, 1] - eb[:, 1] * ec[:, 0])
    weights = jac[:, None] * wref[None, :]
    return pts.reshape(-1, 2), weights.reshape(-1)
