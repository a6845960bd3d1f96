"""Four-stage market: subscribe, price, DSO-FN matching, per-DSO FN-DSS matching."""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from .equilibrium import (
    PricingResult,
    dss_utility,
    network_cost,
    queueing_cost,
    set_prices,
    subscribe,
)
from .matching import build_dso_fn_sides, build_fn_dss_sides, run_matching
from .model import TOL, Allocation, MarketOutcome, Scenario, UtilityReport

log = logging.getLogger(__name__)


def _dso_demand(scenario: Scenario, subscription, pricing: PricingResult) -> list[float]:
    demand = [0.0] * scenario.n_dso
    for j, i in enumerate(subscription):
        if i is not None and pricing.participating[j]:
            demand[i] += pricing.purchases[j]
    return demand


def run_market(scenario: Scenario) -> MarketOutcome:
    subscription = subscribe(scenario)
    pricing = set_prices(scenario, subscription)
    demand = _dso_demand(scenario, subscription, pricing)

    proposers, acceptors = build_dso_fn_sides(scenario, pricing)
    rented = run_matching(proposers, acceptors).allocation

    # FN quota left unused inside a DSO's sub-market is released, so the
    # DSO-FN layer records what the DSSs actually drew.
    fn_dss: dict[tuple[int, int], float] = {}
    dso_fn: dict[tuple[int, int], float] = {}
    for dso in scenario.dsos:
        sub_props, sub_accs = build_fn_dss_sides(scenario, dso.id, rented, pricing)
        result = run_matching(sub_props, sub_accs)
        for (k, j), q in result.allocation.entries.items():
            fn_dss[(k, j)] = q
            dso_fn[(dso.id, k)] = dso_fn.get((dso.id, k), 0.0) + q

    cloud = {}
    for i in range(scenario.n_dso):
        from_fns = math.fsum(q for (row, _), q in dso_fn.items() if row == i)
        cloud[i] = max(0.0, demand[i] - from_fns)

    outcome = MarketOutcome(
        prices=pricing.prices,
        purchases=pricing.purchases,
        participating=pricing.participating,
        subscription=subscription,
        dso_fn=Allocation(dso_fn, cloud),
        fn_dss=Allocation(fn_dss),
        utilities=UtilityReport((), (), (), ()),
    )
    return _with_utilities(outcome, scenario)


def cloud_only_baseline(scenario: Scenario) -> MarketOutcome:
    """Same pricing stage, every purchased CRB served from the cloud."""
    subscription = subscribe(scenario)
    pricing = set_prices(scenario, subscription)
    demand = _dso_demand(scenario, subscription, pricing)
    outcome = MarketOutcome(
        prices=pricing.prices,
        purchases=pricing.purchases,
        participating=pricing.participating,
        subscription=subscription,
        dso_fn=Allocation({}, dict(enumerate(demand))),
        fn_dss=Allocation(),
        utilities=UtilityReport((), (), (), ()),
    )
    return _with_utilities(outcome, scenario)


def _with_utilities(outcome: MarketOutcome, scenario: Scenario) -> MarketOutcome:
    dso = dso_utilities(outcome, scenario)
    for i, w in enumerate(dso):
        if w < -TOL:
            log.debug("DSO %d runs at a loss (utility %.6g)", i, w)
    report = UtilityReport(
        dss=tuple(dss_utilities(outcome, scenario)),
        dso=tuple(dso),
        fn=tuple(fn_utilities(outcome, scenario)),
        cloud=tuple(outcome.dso_fn.cloud.get(i, 0.0) for i in range(scenario.n_dso)),
    )
    return MarketOutcome(
        prices=outcome.prices,
        purchases=outcome.purchases,
        participating=outcome.participating,
        subscription=outcome.subscription,
        dso_fn=outcome.dso_fn,
        fn_dss=outcome.fn_dss,
        utilities=report,
    )


def fn_utilities(outcome: MarketOutcome, scenario: Scenario) -> list[float]:
    """Preference-weighted rent margin over every DSS an FN serves.

    The transmission cost per CRB is kappa times the FN-DSS distance; a
    negative margin is reported as is.
    """
    dist = scenario.fn_dss_distances()
    terms: list[list[float]] = [[] for _ in range(scenario.n_fn)]
    for (k, j), q in outcome.fn_dss.entries.items():
        fn = scenario.fns[k]
        i = outcome.subscription[j]
        c = scenario.kappa * dist[k, j]
        terms[k].append(fn.dso_weights[i] * (fn.rent - c) * q)
    return [math.fsum(t) for t in terms]


def dso_utilities(outcome: MarketOutcome, scenario: Scenario) -> list[float]:
    revenue = [[] for _ in range(scenario.n_dso)]
    for j, i in enumerate(outcome.subscription):
        if i is not None and outcome.participating[j]:
            revenue[i].append(outcome.prices[i] * outcome.purchases[j])
    out = []
    for dso in scenario.dsos:
        i = dso.id
        rent = math.fsum(
            scenario.fns[k].rent * q for (row, k), q in outcome.dso_fn.entries.items() if row == i
        )
        cloud = dso.cloud_unit_cost * outcome.dso_fn.cloud.get(i, 0.0)
        out.append(math.fsum(revenue[i]) - rent - cloud)
    return out


def serving_distance(outcome: MarketOutcome, scenario: Scenario, j: int, dist: Optional[np.ndarray] = None) -> float:
    """Quantity-weighted mean distance of DSS j's servers, cloud share included."""
    if dist is None:
        dist = scenario.fn_dss_distances()
    q = outcome.purchases[j]
    if q <= 0:
        return 0.0
    parts = [(dist[k, col], x) for (k, col), x in outcome.fn_dss.entries.items() if col == j]
    from_fns = math.fsum(x for _, x in parts)
    cloud = max(0.0, q - from_fns)
    weighted = math.fsum([l * x for l, x in parts] + [scenario.cloud_distance * cloud])
    return weighted / (from_fns + cloud)


def dss_utilities(outcome: MarketOutcome, scenario: Scenario) -> list[float]:
    dist = scenario.fn_dss_distances()
    out = []
    for j, d in enumerate(scenario.dsss):
        i = outcome.subscription[j]
        if i is None or not outcome.participating[j]:
            out.append(0.0)
            continue
        q = outcome.purchases[j]
        o = queueing_cost(d.arrival_rate, scenario.mu, q)
        h = network_cost(scenario.theta, serving_distance(outcome, scenario, j, dist))
        out.append(dss_utility(d, outcome.prices[i], q, o + h))
    return out
