"""wavefocus: boundary excitations that focus acoustic and electromagnetic
waves in prescribed space regions and time windows.

Library layout:

* geometry: grids, regions, boundary patches, travel-time maps,
  feasibility checks;
* linops: matrix-free operators, Krylov solvers, Tikhonov minimizers,
  localizer sequences;
* wave / wave_localize: scalar wave solver, restricted solution operators
  with exact discrete adjoints, localization pipelines;
* maxwell / maxwell_localize: the Yee-grid counterparts;
* fields_io / config / cli: on-disk artifacts and the command-line driver.
"""

from .errors import (
    CflError,
    ConfigError,
    DegenerateXiError,
    EmptyRegionError,
    FeasibilityError,
    FormatError,
    InvalidCoefficientError,
    InvalidInputError,
    MaxIterationsWarning,
    NotPositiveDefiniteError,
    NumericalBreakdownError,
    RegionOverlapError,
    ShapeError,
    WavefocusError,
)
from .geometry import (
    BoundaryPatch,
    FeasibilityReport,
    Grid,
    Region,
    TimeGrid,
    TravelTimeMap,
    boundary_patch,
    build_region,
    check_feasibility,
    distance_from_region,
    region_inradius,
    travel_time_map,
)
from .linops import (
    InnerProduct,
    LinearMap,
    LocalizerConfig,
    LocalizerOutput,
    WeightedInner,
    cg_gram_solve,
    dot_test,
    localizer_sequence,
    range_inclusion_probe,
    tikhonov_solve,
)
from .wave import (
    BoundaryTimeSeries,
    CoefficientField,
    FieldMovie,
    SpaceTimeWindow,
    cfl_max_dt,
    forward_wave,
    interior_source_wave,
    make_L_op,
    make_P_op,
    make_T_op,
    normal_derivative_trace,
    time_integrate,
    time_reverse,
    time_translate,
    wave_energy,
)
from .wave_localize import (
    LocalizationReport,
    build_xi_space,
    localize_space,
    localize_time_case1,
    localize_time_case2,
)
from .maxwell import (
    EmCoefficients,
    EmFieldMovie,
    adjoint_maxwell_solve,
    em_boundary_space,
    em_cfl_max_dt,
    forward_maxwell,
    make_em_P_op,
    make_em_ops,
    make_T_sigma_tau,
    make_T_sigma_tau_h,
    maxwell_energy,
    project_div_free,
    project_div_free_mu,
)
from .maxwell_localize import (
    EmXiRecipe,
    build_em_xi,
    localize_space_em,
    localize_time_em_case1,
    localize_time_em_case2,
)

__version__ = "0.1.0"
