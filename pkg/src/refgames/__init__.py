"""Random-assignment extensive-form games on complete k-ary trees.

Monte Carlo values by streaming backward induction (:mod:`refgames.tree`),
analytic evolution of the value distribution (:mod:`refgames.measure`), and
the concentration points and REF bargaining solution built on top of them
(:mod:`refgames.solution`).
"""

from .errors import (
    ConfigError,
    DomainError,
    EmptySampleSet,
    InvalidDomain,
    LengthMismatch,
    NonPositiveScale,
    NotConverged,
    RefGamesError,
    ScheduleTooShort,
    SchemaMismatch,
    SegmentDomain,
    UnnormalizedInput,
)
from .geometry import (
    BUILTIN_DOMAINS,
    FeasibleSet,
    ParetoBoundary,
    affine_transform,
    extract_pareto_boundary,
    is_symmetric,
    pareto_distance,
    quadrant_membership,
    resolve_domain,
    sample_uniform,
)
from .measure import (
    MAX1,
    MAX2,
    AlternatingPair,
    CdfGrid,
    FixedPointReport,
    GridMeasure,
    Mix,
    Phi,
    PhiEps,
    RawPair,
    b_eps,
    evolve_grid,
    hybrid_schedule,
    iterate_cdf,
    marginal_quantile,
    pareto_band_mass,
    phi,
    phi_eps,
    quadrant_mass,
)
from .solution import (
    AxiomReport,
    QuantileTrack,
    SolutionReport,
    axiom_report,
    concentration_point,
    ref_solution,
    ternary_alternating_fixed_point,
    ternary_random_limit,
    track_quantiles,
)
from .streams import CounterStream, ReplayStream
from .tree import (
    AssignmentModel,
    GameSpec,
    ValueSampleSet,
    empirical_box_mass,
    empirical_quantile,
    exact_spe_value,
    ks_statistic,
    sample_spe_value,
    simulate,
)

__version__ = "0.1.0"
