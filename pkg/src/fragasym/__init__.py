"""Fragmentation equation toolkit: Mellin solution, long-time asymptotics, direct solvers."""
from .asymptotics import (
    AsymptoticValue,
    SaddleData,
    leading_term,
    phi_eval,
    poisson_approx,
    saddle_point,
    theorem3b_series,
)
from .errors import *  # noqa: F401,F403
from .kernel import (
    FragmentationKernel,
    check_admissible,
    condition_h,
    from_atoms,
    homogeneous,
    lower_abscissa,
    mellin_K,
    mellin_K_derivative,
    mitosis,
    power,
    tabulated,
)
from .mellin import (
    ContourConfig,
    InitialDatum,
    compact_bump,
    indicator,
    inverse_mellin_u,
    log_gaussian,
    mellin_u0,
    meromorphic_extension,
    tabulated_datum,
    two_sided_power,
)
from .regions import (
    F_exponent,
    G_exponent,
    RegionReport,
    classify_growth_frag,
    critical_curve_slope,
    region_report,
)
from .simulator import (
    LogGridSolution,
    dirac_diagnostics,
    growth_frag_transform,
    picard_solve,
    rescaled_profiles,
    simulate_log_grid,
)

__version__ = "0.1.0"
