"""Numerical lab for transmission eigenfunctions and medium scattering near thin ends."""
from .cgo import CgoParams, DecayCertificate, cgo_eval, cgo_grad, cgo_laplacian, select_direction
from .errors import ThinEndError
from .estimates import ExponentParams, SweepRecord, check_constraints, fit_decay_exponent
from .fields import CoefficientSet, SymbolicField, make_tbc_partner, make_zero_cauchy_family
from .geometry import (GraphCurve, Mesh2D, ProductEnd2D, ProductEnd3D, Subregion, build_subregion,
                       build_thin_end_2d, mesh_subregion, nearest_lateral_point)
from .identity import (coupled_identity_breakdown, green_residual, manufacture_triple,
                       transmission_identity_residual)
from .scattering import FarField, MediumGrid, far_field, solve_ls

__version__ = "0.1.0"
