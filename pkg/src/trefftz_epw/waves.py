"""Plane-wave bases: propagative/evanescent parametrization and sampling.

An evanescent plane wave (EPW) is x -> e^{i kappa d.x} with a complex
direction d satisfying d.d = 1 (dot product without conjugation).  Writing
d = zeta*p + i*eta*e with unit vectors p (propagation) and e (decay,
orthogonal to p), the wave oscillates with apparent wavenumber kappa*zeta
along p and decays at rate kappa*eta along e.  eta = 0 recovers the
ordinary propagative plane wave (PPW).

The basis selection recipe draws parameters quasi-randomly (Sobol) from
the cylinder [0, 2pi) x {+-1} x [0, 1] and converts the third coordinate
into an evanescence strength scaled by the element size and a Fourier
truncation level L = P/4 (L = 0 reproduces a pure PPW basis).  Each wave
is normalized by its max modulus over the element's anchor points; for a
convex polygon the max over the closure is attained at a vertex because
the log-modulus is affine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EpwParams",
    "NormalizedWave",
    "ElementBasis",
    "ElementGeometry",
    "SamplePoint",
    "make_epw",
    "epw_eval",
    "epw_grad",
    "sobol3",
    "sobol3_block",
    "map_sample",
    "sample_basis",
    "normalize_wave",
    "triangle_geometry",
    "build_element_bases",
    "MODE_PPW",
    "MODE_EPW",
]

MODE_PPW = "PPW"
MODE_EPW = "EPW"

# exp floor: magnitudes saturate at ~1e-300 instead of underflowing to 0
_LOG_FLOOR = -690.7755278982137


@dataclass(frozen=True)
class EpwParams:
    """Parameters of one (possibly evanescent) plane wave e^{i kappa d.x}."""

    theta: float   # propagation angle in [0, 2pi)
    phi: int       # decay side, +1 or -1
    eta: float     # evanescence strength, >= 0
    kappa: float   # wavenumber, > 0
    zeta: float = field(init=False)      # sqrt(1 + eta^2) = |Re d|
    d: np.ndarray = field(init=False)    # complex direction, d.d = 1

    def __post_init__(self):
        zeta = math.sqrt(1.0 + self.eta * self.eta)
        p = np.array([math.cos(self.theta), math.sin(self.theta)])
        e = np.array([-math.sin(self.theta), math.cos(self.theta)])
        d = zeta * p + 1j * self.eta * self.phi * e
        d.flags.writeable = False
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "d", d)

    @property
    def p(self) -> np.ndarray:
        """Unit propagation direction."""
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def e(self) -> np.ndarray:
        """Unit decay direction (phi-signed normal of p)."""
        return self.phi * np.array([-math.sin(self.theta), math.cos(self.theta)])


def make_epw(theta: float, phi: int, eta: float, kappa: float) -> EpwParams:
    """Build wave parameters, validating eta >= 0, kappa > 0, phi in {-1, +1}."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if phi not in (1, -1):
        raise ValueError(f"phi must be +1 or -1, got {phi}")
    return EpwParams(theta=float(theta) % (2.0 * math.pi), phi=int(phi),
                     eta=float(eta), kappa=float(kappa))


def _log_eval(w: EpwParams, x: np.ndarray) -> np.ndarray:
    """Complex exponent i*kappa*d.x at points x (..., 2)."""
    return (1j * w.kappa) * (x @ w.d)


def _exp_floored(z: np.ndarray) -> np.ndarray:
    """exp(z) with the magnitude saturated at ~1e-300 instead of underflowing."""
    return np.exp(np.maximum(z.real, _LOG_FLOOR) + 1j * z.imag)


def epw_eval(w: EpwParams, x):
    """Evaluate e^{i kappa d.x} at one point (2,) or points (..., 2)."""
    x = np.asarray(x, dtype=float)
    out = _exp_floored(_log_eval(w, x))
    return complex(out) if x.ndim == 1 else out


def epw_grad(w: EpwParams, x):
    """Gradient (i kappa d_j) e^{i kappa d.x}, shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    val = _exp_floored(_log_eval(w, x))
    grad = (1j * w.kappa) * np.multiply.outer(val, w.d)
    return grad if x.ndim > 1 else np.asarray(grad)


# -- Sobol sequence (dimensions 1-3, standard direction numbers) ---------

_SOBOL_BITS = 32
SOBOL_MAX = 1 << _SOBOL_BITS


def _sobol_directions() -> np.ndarray:
    v = np.zeros((3, _SOBOL_BITS), dtype=np.uint64)
    # dimension 1: van der Corput in base 2
    for j in range(_SOBOL_BITS):
        v[0, j] = 1 << (_SOBOL_BITS - 1 - j)
    # dimension 2: primitive polynomial x + 1
    m = [1]
    for k in range(1, _SOBOL_BITS):
        m.append((2 * m[k - 1]) ^ m[k - 1])
    for j in range(_SOBOL_BITS):
        v[1, j] = m[j] << (_SOBOL_BITS - 1 - j)
    # dimension 3: primitive polynomial x^2 + x + 1
    m = [1, 3]
    for k in range(2, _SOBOL_BITS):
        m.append((2 * m[k - 1]) ^ (4 * m[k - 2]) ^ m[k - 2])
    for j in range(_SOBOL_BITS):
        v[2, j] = m[j] << (_SOBOL_BITS - 1 - j)
    v.flags.writeable = False
    return v


_SOBOL_V = _sobol_directions()


def sobol3_block(start: int, count: int) -> np.ndarray:
    """Points ``start .. start+count-1`` of the 3D Sobol sequence, shape (count, 3)."""
    if start < 0 or count < 0 or start + count > SOBOL_MAX:
        raise ValueError("Sobol index range must lie within [0, 2^32]")
    n = np.arange(start, start + count, dtype=np.uint64)
    acc = np.zeros((count, 3), dtype=np.uint64)
    for j in range(_SOBOL_BITS):
        bit = (n >> np.uint64(j)) & np.uint64(1)
        acc ^= bit[:, None] * _SOBOL_V[:, j][None, :]
    return acc.astype(np.float64) / float(SOBOL_MAX)


def sobol3(index: int) -> np.ndarray:
    """The 3D Sobol point at one index (direct binary ordering), in [0, 1)^3."""
    return sobol3_block(index, 1)[0]


@dataclass(frozen=True)
class SamplePoint:
    """One draw from the parameter cylinder [0, 2pi) x {+-1} x [0, 1]."""

    theta: float
    phi: int
    xi: float


def map_sample(u) -> SamplePoint:
    """Map a uniform cube point to the parameter cylinder.

    theta = 2pi u1; phi = +1 iff u2 >= 1/2 (equal mass per side under the
    uniform measure); xi = u3.
    """
    u = np.asarray(u, dtype=float)
    return SamplePoint(theta=2.0 * math.pi * float(u[0]),
                       phi=1 if u[1] >= 0.5 else -1,
                       xi=float(u[2]))


# -- normalization and element bases --------------------------------------


@dataclass(frozen=True)
class ElementGeometry:
    """What the sampling recipe needs to know about one cell.

    ``anchors`` are the points used for sup-norm normalization (the
    vertices for a polygon; a boundary point cloud for smooth shapes) and
    ``diam`` is the cell diameter.
    """

    anchors: np.ndarray  # (k, 2)
    diam: float


def triangle_geometry(mesh, elem_id: int) -> ElementGeometry:
    return ElementGeometry(anchors=mesh.triangle_coords(elem_id),
                           diam=float(mesh.tri_diameters[elem_id]))


@dataclass(frozen=True)
class NormalizedWave:
    """A wave together with its sup-norm over the element's anchor points."""

    params: EpwParams
    norm_factor: float   # max |EW| over anchors, > 0
    log_norm: float      # log(norm_factor), exact for the decay exponent
    anchor: np.ndarray   # the anchor points used

    def eval(self, x):
        """Normalized value EW(x) / norm_factor."""
        x = np.asarray(x, dtype=float)
        out = _exp_floored(_log_eval(self.params, x) - self.log_norm)
        return complex(out) if x.ndim == 1 else out

    def grad(self, x):
        """Gradient of the normalized wave, shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        val = _exp_floored(_log_eval(self.params, x) - self.log_norm)
        return (1j * self.params.kappa) * np.multiply.outer(val, self.params.d)


def normalize_wave(params: EpwParams, anchors) -> NormalizedWave:
    """Normalize by the max modulus at the anchor points.

    |EW(x)| = e^{-kappa eta e.x} and the exponent is affine in x, so for a
    convex cell anchored at its vertices this is the sup over the cell.
    """
    anchors = np.asarray(anchors, dtype=float)
    log_mods = ((1j * params.kappa) * (anchors @ params.d)).real
    log_norm = float(np.max(log_mods))
    return NormalizedWave(params=params, norm_factor=math.exp(log_norm),
                          log_norm=log_norm, anchor=anchors)


def sample_basis(geom: ElementGeometry, P: int, kappa: float, mode: str,
                 stream_offset: int = 0, count: int | None = None
                 ) -> list[NormalizedWave]:
    """Draw normalized waves for one cell with the budget-P recipe.

    Propagation angles come from Sobol points ``stream_offset`` onward.
    In EPW mode the truncation level is L = P/4 and the apparent
    wavenumber factor is zeta = max(1, 2L/(kappa diam) * xi); in PPW mode
    L = 0 so every zeta = 1.  ``count`` (default P) sets how many draws
    to take; draws beyond P extend the same budget-P space (used for
    oversampled test sets, which must contain the trial waves so that
    small singular values of the rectangular Gram blocks certify small
    traces).
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    if mode not in (MODE_PPW, MODE_EPW):
        raise ValueError(f"mode must be {MODE_PPW!r} or {MODE_EPW!r}")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    n_draw = P if count is None else count
    if n_draw < P:
        raise ValueError("count must be >= P")
    L = 0.0 if mode == MODE_PPW else P / 4.0
    scale = 2.0 * L / (kappa * geom.diam)
    waves = []
    for u in sobol3_block(stream_offset, n_draw):
        y = map_sample(u)
        zeta = max(1.0, scale * y.xi)
        eta = math.sqrt(max(zeta * zeta - 1.0, 0.0))
        waves.append(normalize_wave(make_epw(y.theta, y.phi, eta, kappa),
                                    geom.anchors))
    return waves


@dataclass(frozen=True)
class ElementBasis:
    """Trial and test waves attached to one element (len(test) >= len(trial))."""

    elem_id: int
    trial: list[NormalizedWave]
    test: list[NormalizedWave]

    def __post_init__(self):
        if len(self.test) < len(self.trial):
            raise ValueError("test basis must be at least as large as trial basis")

    @property
    def n_trial(self) -> int:
        return len(self.trial)

    @property
    def n_test(self) -> int:
        return len(self.test)


def build_element_bases(mesh, P: int, kappa: float, mode: str,
                        oversampling: float = 1.1, stream_offset: int = 0,
                        test_equals_trial: bool = False) -> list[ElementBasis]:
    """Sample trial and test bases for every element of a mesh.

    Each element consumes a contiguous block of ceil(oversampling*P)
    Sobol draws with the budget-P recipe; the first P become the trial
    basis and the whole block the test basis, so test spaces contain the
    trial spaces and bases are reproducible and distinct across elements.
    With ``test_equals_trial`` the trial waves are reused verbatim as
    test waves (square blocks, e.g. for Hermitian-structure checks).
    """
    if oversampling < 1.0:
        raise ValueError("oversampling ratio must be >= 1")
    offset = stream_offset
    bases = []
    for elem in range(mesh.num_elements):
        geom = triangle_geometry(mesh, elem)
        if test_equals_trial:
            trial = sample_basis(geom, P, kappa, mode, stream_offset=offset)
            test = trial
            offset += P
        else:
            n_test = math.ceil(oversampling * P)
            test = sample_basis(geom, P, kappa, mode, stream_offset=offset,
                                count=n_test)
            trial = test[:P]
            offset += n_test
        bases.append(ElementBasis(elem_id=elem, trial=trial, test=test))
    return bases
