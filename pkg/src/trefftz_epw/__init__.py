"""2D Helmholtz Trefftz solver with propagative and evanescent plane waves.

The package implements the ultraweak variational formulation on
triangular meshes with per-element plane-wave bases, the quasi-random
evanescent-wave sampling recipe, and the oversampled truncated-SVD
regularized solve, plus the experiment drivers that reproduce the
convergence and stability studies at desk scale.
"""

__version__ = "0.1.0"

from .mesh import (Mesh, MeshError, MeshFormatError, NonConformingMeshError,
                   OrientationError, build_rect_mesh, element_diameter,
                   load_mesh, save_mesh)
from .specialfn import bessel_j, bessel_y, fundamental_solution, hankel1, phi0
from .waves import (ElementBasis, ElementGeometry, EpwParams, NormalizedWave,
                    MODE_EPW, MODE_PPW, build_element_bases, epw_eval,
                    epw_grad, make_epw, normalize_wave, sample_basis, sobol3,
                    triangle_geometry)
from .assembly import (BlockMatrix, assemble_C, assemble_D, assemble_rhs,
                       edge_integral, manufacture_g, robin_trace_factor)
from .regsolve import (DEFAULT_EPSILON, DEFAULT_OVERSAMPLING, SolveReport,
                       SolverWarning, SingularSystemError, SvdBlock,
                       complex_svd, solve_uwvf, truncated_pinv)
from .analysis import (DiscreteField, ErrorReport, StabilityProbeReport,
                       disc_geometry, eval_field, h1_error,
                       reference_plane_wave, reference_point_source,
                       stability_probe)

__all__ = [name for name in dir() if not name.startswith("_")]
