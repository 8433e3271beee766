"""Magnetic adapted complex structures on cotangent tubes.

Constructs the complex structure induced on a tube in a cotangent bundle by
analytically continuing the twisted (magnetic) Hamiltonian flow to imaginary
time, and verifies its defining identities numerically against closed-form
solutions on the constant-field plane and the invariant-field sphere.
"""

from .geometry import (
    ChartedGeometry,
    GeometryError,
    PhasePoint,
    energy,
    make_flat_magnetic,
    make_sphere_magnetic,
    pointwise_geometry,
    twisted_symplectic_matrix,
    validate_geometry,
)
from .flow import (
    BlowUpError,
    ChartExitError,
    ComplexTime,
    FlowError,
    FlowOpts,
    FlowState,
    StepSizeError,
    flow_complex,
    flow_many,
    flow_real,
    hamiltonian_field,
    radius_estimate,
)
from .structure import (
    ACSPointData,
    LagrangianFrame,
    acs_point,
    assemble_J,
    frame_at,
    frames_at_many,
    integrability_residual,
    subspace_distance,
    transversality_check,
)
from .kahler import (
    PotentialSample,
    dbar_residual,
    holomorphic_extension,
    kappa1_flat,
    kappa2_flat,
    kde_residual,
    potential_f,
    potential_sample,
    section_weight,
)
from .intertwine import (
    check_flow_reversal,
    check_frame_intertwine,
    check_shifted_frame_intertwine,
)
from . import oracles
from .suites import run_suite

__version__ = "0.1.0"
