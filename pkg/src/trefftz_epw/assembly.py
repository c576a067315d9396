"""Skeleton assembly of the ultraweak variational formulation.

The discrete system is (D - C) u = b where, for Robin traces
``gamma_pm v = +-dv/dn - i kappa sigma v`` on element boundaries,

* D is block-diagonal: one block per element K, entry (r, q) =
  integral over dK of sigma^-1 gamma_- phi_q conj(gamma_- psi_r),
* C couples distinct neighboring elements through the shared edge:
  entry (r, q) = integral of sigma^-1 gamma_-^{K1} phi_q conj(gamma_+^{K2} psi_r),
  rows indexed by K2's test waves and columns by K1's trial waves,
* b tests the boundary datum g against gamma_+ of the test waves on the
  domain boundary.

On a flat edge a plane wave's Robin trace is just a constant times the
wave, so all D and C entries reduce to edge integrals of products of two
exponentials, computed in closed form.  Only the right-hand side needs
numerical quadrature (the datum g is a general callable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import segment_rule
from .specialfn import phi0
from .waves import ElementBasis, EpwParams, NormalizedWave

__all__ = [
    "BlockMatrix",
    "robin_trace_factor",
    "edge_integral",
    "assemble_D",
    "assemble_C",
    "assemble_rhs",
    "manufacture_g",
]

# same crossover as phi0: below it the finite difference of exponentials
# cancels catastrophically, above it the Taylor series would need more terms
_SMALL_ARG = 0.25


@dataclass
class BlockMatrix:
    """Complex matrix stored as per-element-pair dense blocks.

    ``blocks[(row_elem, col_elem)]`` has shape (n_test of row_elem,
    n_trial of col_elem).  Row offsets index the global test space, column
    offsets the global trial space.
    """

    row_sizes: np.ndarray
    col_sizes: np.ndarray
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.row_offsets = np.concatenate(([0], np.cumsum(self.row_sizes)))
        self.col_offsets = np.concatenate(([0], np.cumsum(self.col_sizes)))

    @property
    def shape(self):
        return int(self.row_offsets[-1]), int(self.col_offsets[-1])

    def add_block(self, row_elem: int, col_elem: int, block: np.ndarray):
        expected = (self.row_sizes[row_elem], self.col_sizes[col_elem])
        if block.shape != tuple(expected):
            raise ValueError(f"block shape {block.shape} != expected {expected}")
        key = (row_elem, col_elem)
        if key in self.blocks:
            self.blocks[key] = self.blocks[key] + block
        else:
            self.blocks[key] = block

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.complex128)
        for (ri, ci), blk in self.blocks.items():
            r0, c0 = self.row_offsets[ri], self.col_offsets[ci]
            out[r0:r0 + blk.shape[0], c0:c0 + blk.shape[1]] += blk
        return out

    def is_block_diagonal(self) -> bool:
        return all(r == c for r, c in self.blocks)


def robin_trace_factor(w: EpwParams, normal, sigma: float, sign: int) -> complex:
    """Constant c with (+-d/dn - i kappa sigma) EW = c * EW on a flat edge.

    ``sign`` selects the trace: +1 for gamma_+, -1 for gamma_-.
    """
    normal = np.asarray(normal, dtype=float)
    if abs(np.hypot(normal[0], normal[1]) - 1.0) > 1e-12:
        raise ValueError("normal must be a unit vector")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return sign * 1j * w.kappa * complex(w.d @ normal) - 1j * w.kappa * sigma


def _trace_factors(waves, normal, sigma: float, sign: int) -> np.ndarray:
    k = np.array([w.params.kappa for w in waves])
    dn = np.array([w.params.d @ np.asarray(normal, dtype=float) for w in waves])
    return sign * 1j * k * dn - 1j * k * sigma


def _edge_integral_matrix(v0, v1, trial, test) -> np.ndarray:
    """Closed-form integrals over [v0, v1] of phi_q conj(psi_r), shape (R, Q).

    Writing the normalized product as e^{a0 + a t} along the unit-speed
    parametrization, the integral is |e| e^{a0} (e^a - 1)/a.  It is
    evaluated as |e| (e^{a0+a} - e^{a0})/a so no intermediate exponential
    can overflow when v0, v1 belong to both waves' anchor sets (then
    Re(a0) <= 0 and Re(a0+a) <= 0), with a Taylor branch for small |a|.
    """
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    edge_len = float(np.hypot(*(v1 - v0)))
    # i*kappa*d for the trial side, -i*kappa*conj(d) for the conjugated test side
    wq = np.array([1j * w.params.kappa * w.params.d for w in trial])      # (Q, 2)
    wr = np.array([-1j * w.params.kappa * np.conj(w.params.d) for w in test])  # (R, 2)
    lq = np.array([w.log_norm for w in trial])
    lr = np.array([w.log_norm for w in test])
    a0 = (wr @ v0 - lr)[:, None] + (wq @ v0 - lq)[None, :]
    a = (wr @ (v1 - v0))[:, None] + (wq @ (v1 - v0))[None, :]
    small = np.abs(a) < _SMALL_ARG
    out = np.empty_like(a)
    if np.any(small):
        out[small] = np.exp(a0[small]) * phi0(a[small])
    big = ~small
    if np.any(big):
        out[big] = (np.exp(a0[big] + a[big]) - np.exp(a0[big])) / a[big]
    return edge_len * out


def edge_integral(v0, v1, wq: NormalizedWave, wr: NormalizedWave) -> complex:
    """Integral over the segment [v0, v1] of the normalized product wq * conj(wr)."""
    return complex(_edge_integral_matrix(v0, v1, [wq], [wr])[0, 0])


def _sizes(bases: list[ElementBasis]):
    n_test = np.array([b.n_test for b in bases])
    n_trial = np.array([b.n_trial for b in bases])
    return n_test, n_trial


def assemble_D(mesh, bases: list[ElementBasis], sigma: float = 1.0) -> BlockMatrix:
    """Block-diagonal Gram-type matrix of gamma_- traces over element boundaries."""
    n_test, n_trial = _sizes(bases)
    D = BlockMatrix(row_sizes=n_test, col_sizes=n_trial)
    inv_sigma = 1.0 / sigma
    for basis in bases:
        K = basis.elem_id
        block = np.zeros((basis.n_test, basis.n_trial), dtype=np.complex128)
        for edge in mesh.elem_edges[K]:
            v0, v1 = mesh.edge_endpoints(edge)
            normal = mesh.outward_normal(edge, K)
            cq = _trace_factors(basis.trial, normal, sigma, -1)
            cr = _trace_factors(basis.test, normal, sigma, -1)
            integ = _edge_integral_matrix(v0, v1, basis.trial, basis.test)
            block += inv_sigma * np.conj(cr)[:, None] * cq[None, :] * integ
        D.add_block(K, K, block)
    return D


def assemble_C(mesh, bases: list[ElementBasis], sigma: float = 1.0) -> BlockMatrix:
    """Neighbor coupling over the interior skeleton (no self blocks)."""
    n_test, n_trial = _sizes(bases)
    C = BlockMatrix(row_sizes=n_test, col_sizes=n_trial)
    inv_sigma = 1.0 / sigma
    for edge in mesh.interior_edges:
        v0, v1 = mesh.edge_endpoints(edge)
        k_left = int(mesh.edge_left[edge])
        k_right = int(mesh.edge_right[edge])
        for k_trial, k_test in ((k_left, k_right), (k_right, k_left)):
            trial = bases[k_trial].trial
            test = bases[k_test].test
            c_minus = _trace_factors(trial, mesh.outward_normal(edge, k_trial),
                                     sigma, -1)
            c_plus = _trace_factors(test, mesh.outward_normal(edge, k_test),
                                    sigma, +1)
            integ = _edge_integral_matrix(v0, v1, trial, test)
            C.add_block(k_test, k_trial,
                        inv_sigma * np.conj(c_plus)[:, None] * c_minus[None, :] * integ)
    return C


def _boundary_quad_order(waves, edge_len: float) -> int:
    zeta = max(w.params.zeta for w in waves)
    eta = max(w.params.eta for w in waves)
    kappa = max(w.params.kappa for w in waves)
    return max(12, math.ceil(1.5 * (kappa * zeta * edge_len + kappa * eta * edge_len)))


def assemble_rhs(mesh, bases: list[ElementBasis], sigma: float, g,
                 quad_factor: float = 1.0) -> np.ndarray:
    """Right-hand side: g tested with gamma_+ over boundary edges.

    ``g(points, normal)`` returns the impedance datum at quadrature points
    of a boundary edge with the given outward normal.  The Gauss order per
    edge scales with the test waves' oscillation and decay rates;
    ``quad_factor`` multiplies it (used by self-convergence checks).
    """
    n_test, _ = _sizes(bases)
    offsets = np.concatenate(([0], np.cumsum(n_test)))
    b = np.zeros(int(offsets[-1]), dtype=np.complex128)
    inv_sigma = 1.0 / sigma
    for edge in mesh.boundary_edges:
        K = int(mesh.edge_left[edge])
        basis = bases[K]
        v0, v1 = mesh.edge_endpoints(edge)
        normal = mesh.outward_normal(edge, K)
        n_q = max(2, math.ceil(quad_factor * _boundary_quad_order(
            basis.test, float(mesh.edge_length[edge]))))
        pts, wts = segment_rule(v0, v1, n_q)
        gv = np.asarray(g(pts, normal), dtype=np.complex128)
        c_plus = _trace_factors(basis.test, normal, sigma, +1)
        vals = np.column_stack([w.eval(pts) for w in basis.test])  # (n_q, n_test)
        contrib = inv_sigma * np.conj(c_plus) * (np.conj(vals).T @ (wts * gv))
        b[offsets[K]:offsets[K + 1]] += contrib
    return b


def manufacture_g(reference, sigma: float, kappa: float):
    """Impedance datum of a given field: g = grad(u).n - i kappa sigma u.

    ``reference(points)`` must return ``(values, gradients)`` with shapes
    (n,) and (n, 2).
    """
    def g(points, normal):
        vals, grads = reference(np.asarray(points, dtype=float))
        return grads @ np.asarray(normal, dtype=float) - 1j * kappa * sigma * vals

    return g
