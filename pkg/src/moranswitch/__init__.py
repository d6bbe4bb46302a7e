"""Two-strategy Moran process with mutation.

Exact birth-death solvers and Monte Carlo simulation of the finite chain,
the infinite-population bifurcation analysis, finite-size moment expansions,
and diffusion/WKB asymptotics for the metastable switching times, cross-
validated against each other.
"""

from .games import (
    PayoffMatrix,
    PDMatrix,
    RegimeCase,
    aggregate_mixed,
    aggregate_tft_alld,
    classify_regime,
    ess_profile,
    fitness,
    fitness_counts,
)
from .chain import (
    ChainParams,
    Distribution,
    FptEstimate,
    RoundCapExceeded,
    SimConfig,
    distribution_moments,
    estimate_fpt,
    heatmap,
    mfpt_exact,
    rate_down,
    rate_up,
    simulate,
    stationary_exact,
)
from .deterministic import (
    BifurcationDiagram,
    CriticalMus,
    FixedPoint,
    NotBistableError,
    bistable_triple,
    case1_branches,
    continue_diagram,
    critical_mus_case1,
    drift,
    fixed_points,
    x_star_case2,
)
from .moments import (
    MomentReport,
    corrected_moments,
    lna_variance,
    noise_amplitude,
    skew_sign_case1,
)
from .escape import (
    EscapeReport,
    Quasipotential,
    QuadratureError,
    WkbProfiles,
    compare_quasipotentials,
    curvature,
    mfpt_diffusion,
    mfpt_wkb,
    phi,
    psi,
    simulate_sde,
    stationary_diffusion,
    wkb_profiles,
)

__version__ = "0.1.0"
