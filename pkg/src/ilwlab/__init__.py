"""Pseudospectral laboratory for the intermediate long wave equation.

Submodules
----------
spectral     grids, transforms, Fourier multipliers, projectors, norms
evolution    time integration of ILW / BO / KdV / rescaled ILW
gauge        periodic gauge transform and residual diagnostics
normalform   resonance functions, normal-form operators, norm audits
experiments  deep- and shallow-water limits, inequality audits
io, cli      persistence and the command-line front end
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DivergenceError,
    FormatError,
    IlwlabError,
    InternalConsistencyError,
    PreconditionError,
    RangeError,
    ShapeError,
)
from .spectral import (
    Grid,
    MultiplierSpec,
    SpectralField,
    apply_symbol,
    field_from_function,
    field_from_modes,
    inverse_transform,
    make_grid,
    make_symbol,
    norm,
    project,
    transform,
)
from .evolution import EvolutionConfig, Trajectory, evolve, galilean_conjugate, invariant_report
from .gauge import gauge_trajectory, gauge_w, gauged_residual, mean_normalize, primitive
from .normalform import (
    NormalFormSpec,
    RatioReport,
    bilinear_nf,
    nf_identity_residual,
    ratio_estimate,
    resonance,
    trilinear_nf,
)
from .experiments import (
    S0,
    ExperimentReport,
    deep_water,
    product_bound_audit,
    qdelta_scan,
    shallow_water,
    strichartz_exponents,
)
