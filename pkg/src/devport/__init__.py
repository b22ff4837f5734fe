"""Mean-deviation portfolio optimization on finite scenario spaces."""

from .probspace import (
    FiniteProbSpace,
    MarketModel,
    RandomVariable,
    center_market,
    expectation,
    ingest_csv,
)
from .envelope import (
    RiskEnvelope,
    RiskIdentifierSet,
    build_cvar,
    build_custom,
    build_mad,
    build_mixed_cvar,
    evaluate,
    max_combine,
    mix,
    reject_non_finitely_generated,
    risk_identifiers,
    scale,
)
from .geometry import (
    PwlConvexFunction,
    SteinerConfig,
    VPolytope,
    extended_gradient,
    extreme_filter,
    hausdorff,
    intersect,
    minkowski_sum,
    steiner_point,
    support,
)
from .forward import (
    ForwardSolution,
    PortfolioRiskGenerators,
    diagnose_uniqueness,
    portfolio_risk_generators,
    representation_gap,
    solve_forward,
)
from .inverse import (
    InverseSolutionSet,
    concave_order_leq,
    inverse_solution_set,
    law_invariant_selector,
    robust_mu,
    robust_selector,
    verify_dichotomy,
)
from .allocation import (
    CapitalAllocationResult,
    CooperativeSolution,
    capital_allocation,
    cooperative_envelope,
    deviation_function,
    equilibrium_price_selection,
    solve_cooperative,
    solve_individual,
)
from .blacklitterman import (
    BlResult,
    Views,
    bl_pipeline,
    equilibrium_mu,
    posterior_space,
)

__version__ = "0.1.0"
