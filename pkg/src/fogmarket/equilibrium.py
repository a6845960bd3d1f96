"""Leader-follower pricing between DSOs and their subscribers.

DSSs subscribe to their top-ranked DSO, each DSO posts one unit price and
every subscriber buys its utility-maximising quantity at that price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .model import TOL, DssAgent, Scenario


class UnstableQueueError(ValueError):
    pass


@dataclass(frozen=True)
class DelayBreakdown:
    queueing: float
    network: float

    @property
    def total(self) -> float:
        return self.queueing + self.network


@dataclass(frozen=True)
class PricingResult:
    prices: tuple[float, ...]
    purchases: tuple[float, ...]
    participating: tuple[bool, ...]


def queueing_cost(lam: float, mu: float, q: float) -> float:
    """Queueing delay lam / (mu - lam/q) of a workload served by q CRBs."""
    if lam == 0:
        return 0.0
    if q <= 0 or q <= lam / mu:
        raise UnstableQueueError(f"unstable queue: q={q} <= lam/mu={lam / mu}")
    return lam / (mu - lam / q)


def network_cost(theta: float, l: float) -> float:
    if l < 0:
        raise ValueError(f"negative distance {l}")
    return theta * l


def delay(lam: float, mu: float, q: float, theta: float, l: float) -> DelayBreakdown:
    return DelayBreakdown(queueing_cost(lam, mu, q), network_cost(theta, l))


def dss_utility(dss: DssAgent, r: float, q: float, t: float) -> float:
    """Revenue minus payment minus delay cost; zero for an opted-out DSS (q == 0)."""
    if q == 0:
        return 0.0
    return dss.alpha * dss.arrival_rate - dss.beta * q * r - dss.gamma * t


def optimal_purchase(lam: float, mu: float, r: float, beta: float, gamma: float) -> float:
    """Unconstrained maximiser over q of the subscriber utility at price r."""
    if r <= 0:
        raise ValueError(f"price must be positive (got {r})")
    if lam == 0:
        return 0.0
    return lam / (mu * math.sqrt(r * beta / gamma)) + lam / mu


def min_purchase(lam: float, mu: float, t_th: float) -> float:
    """Smallest q whose queueing delay does not exceed t_th."""
    if mu * t_th <= lam:
        raise ValueError(f"delay bound unsatisfiable: mu*t_th={mu * t_th} <= lam={lam}")
    return lam * t_th / (mu * t_th - lam)


def price_cap(lam: float, mu: float, t_th: float, beta: float, gamma: float) -> float:
    """Highest price at which the follower still buys min_purchase CRBs."""
    if lam <= 0:
        raise ValueError("price cap undefined for zero workload")
    if mu * t_th <= lam:
        raise ValueError(f"delay bound unsatisfiable: mu*t_th={mu * t_th} <= lam={lam}")
    return (gamma / beta) * ((mu * t_th - lam) / lam) ** 2


def subscribe(scenario: Scenario) -> tuple[Optional[int], ...]:
    """Each DSS picks the DSO at the head of its preference list."""
    if not scenario.dsos:
        return tuple(None for _ in scenario.dsss)
    return tuple(d.dso_pref[0] for d in scenario.dsss)


def set_prices(scenario: Scenario, subscription: tuple[Optional[int], ...]) -> PricingResult:
    """Price every DSO at the tightest cap among its subscribers.

    Revenue r * q*(r) increases with r, so the binding constraint is the
    smallest cap. A subscriber whose utility under the worst-case network
    delay (theta times the scenario diameter) would be negative opts out.
    """
    mu, t_th = scenario.mu, scenario.t_th
    served: dict[int, list[int]] = {o.id: [] for o in scenario.dsos}
    for j, i in enumerate(subscription):
        if i is not None:
            served[i].append(j)

    prices = [0.0] * scenario.n_dso
    for i, js in served.items():
        if js:
            prices[i] = min(
                price_cap(d.arrival_rate, mu, t_th, d.beta, d.gamma)
                for d in (scenario.dsss[j] for j in js)
            )

    worst_h = network_cost(scenario.theta, scenario.diameter())
    purchases = [0.0] * scenario.n_dss
    participating = [False] * scenario.n_dss
    for j, i in enumerate(subscription):
        if i is None:
            continue
        d = scenario.dsss[j]
        r = prices[i]
        q = optimal_purchase(d.arrival_rate, mu, r, d.beta, d.gamma)
        t = queueing_cost(d.arrival_rate, mu, q) + worst_h
        if dss_utility(d, r, q, t) >= -TOL:
            purchases[j] = q
            participating[j] = True
    return PricingResult(tuple(prices), tuple(purchases), tuple(participating))
