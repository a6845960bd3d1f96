"""Three-tier fog computing market: leader-follower pricing plus two layers
of quantity matching between operators, fog nodes and subscribers."""

from .equilibrium import (
    DelayBreakdown,
    PricingResult,
    UnstableQueueError,
    dss_utility,
    min_purchase,
    network_cost,
    optimal_purchase,
    price_cap,
    queueing_cost,
    set_prices,
    subscribe,
)
from .harness import GeneratorParams, SweepSpec, generate_scenario, run_sweep
from .market import cloud_only_baseline, dso_utilities, dss_utilities, fn_utilities, run_market
from .matching import (
    BlockingPair,
    MatchSide,
    MatchState,
    assert_pointer_monotone,
    build_dso_fn_sides,
    build_fn_dss_sides,
    find_blocking_pair,
    run_matching,
)
from .model import (
    Allocation,
    DsoAgent,
    DssAgent,
    FogNodeAgent,
    MarketOutcome,
    Point,
    Scenario,
    ScenarioError,
    UtilityReport,
    distance,
    validate_scenario,
)

__all__ = [
    "Allocation",
    "BlockingPair",
    "DelayBreakdown",
    "DsoAgent",
    "DssAgent",
    "FogNodeAgent",
    "GeneratorParams",
    "MarketOutcome",
    "MatchSide",
    "MatchState",
    "Point",
    "PricingResult",
    "Scenario",
    "ScenarioError",
    "SweepSpec",
    "UnstableQueueError",
    "UtilityReport",
    "assert_pointer_monotone",
    "build_dso_fn_sides",
    "build_fn_dss_sides",
    "cloud_only_baseline",
    "distance",
    "dso_utilities",
    "dss_utilities",
    "dss_utility",
    "find_blocking_pair",
    "fn_utilities",
    "generate_scenario",
    "min_purchase",
    "network_cost",
    "optimal_purchase",
    "price_cap",
    "queueing_cost",
    "run_market",
    "run_matching",
    "run_sweep",
    "set_prices",
    "subscribe",
    "validate_scenario",
]

__version__ = "0.1.0"
