"""Minimal surface flow with prescribed contact angle on convex planar domains.

Library layout:

- :mod:`msflow.geometry`    analytic convex domains and contact-angle profiles
- :mod:`msflow.meshing`     Delaunay triangulation with boundary trace data
- :mod:`msflow.operators`   P1 finite-element kernels (mass, stiffness, fluxes)
- :mod:`msflow.flow`        semi-implicit time integration of the flow
- :mod:`msflow.translator`  translating-soliton solvers and radial oracle
- :mod:`msflow.audits`      numerical verification of the a priori estimates
- :mod:`msflow.config`      JSON experiment configuration
- :mod:`msflow.cli`         `msflow` command-line front end
- :mod:`msflow.report`      matplotlib figure rendering of run artifacts
"""

from .geometry import (
    AngleProfile,
    BoundaryFrame,
    SupportCurve,
    build_angle,
    build_domain,
    circle,
    constant_angle,
    ellipse,
    fourier_support,
    frame_at,
)
from .meshing import TriMesh, generate_mesh, mesh_quality_report
from .operators import (
    ForcingModel,
    GradientDiagnostics,
    ScalarField,
    assemble_mass,
    assemble_stiffness,
    boundary_flux_vector,
    forcing_vector,
    gradient_diagnostics,
)
from .flow import FlowConfig, FlowTrajectory, MinimalSurfaceFlow, time_derivative_field
from .translator import (
    RegularizedSolution,
    TranslatorSolution,
    compute_speed,
    radial_oracle,
    solve_regularized,
    solve_translator,
)

__version__ = "0.1.0"
