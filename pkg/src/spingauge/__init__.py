"""Pseudospectral gauge toolkit for spin-fluid maps into the sphere or the hyperbolic plane."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .gauge import (  # noqa: F401
    Frame,
    GaugeData,
    PsiPair,
    SpinField,
    arbitrary_frame,
    build_gauge,
    coulomb_coefficients,
    coulomb_frame,
    differentiated_fields,
    gauge_invariant_products,
    initial_data,
)
from .modified_system import Connection, PsiState, SolverConfig, connection_from_psi, solve, step  # noqa: F401
from .reconstruction import GeometricState, reconstruct, run_gauge_route, solve_direct  # noqa: F401
from .spectral import Grid, SpectralWorkspace  # noqa: F401
from .tensor_algebra import Signature, cross_mu, dot_mu, project_to_target  # noqa: F401
