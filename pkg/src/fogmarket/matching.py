"""Quantity-based many-to-many deferred acceptance.

Proposers walk their preference lists with a pointer and offer everything
they still hold to the pointed acceptor. Acceptors keep the best-ranked
quantity up to their quota across old and new offers and reject the rest.
A proposer whose accepted quantity was cut this round raises its flag and
re-proposes at its current pointer instead of advancing.

The same engine serves both layers of the market: FNs proposing to DSOs,
and, inside one DSO, DSSs proposing to that DSO's FNs. Allocations are keyed
``(acceptor id, proposer id)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .equilibrium import PricingResult
from .model import TOL, Allocation, Scenario

# Safety stop only. Layer-shaped markets finish within P * L + 1 rounds, but
# with cyclic preferences on both sides a displaced chunk can circulate
# for many rounds before the holdings it displaces run out.
MAX_ROUNDS = 1_000_000


def preference_order(ids: Sequence[int], keys: Sequence[float], descending: bool = False) -> tuple[int, ...]:
    """Sort ``ids`` by ``keys``; equal keys fall back to ascending id."""
    sign = -1.0 if descending else 1.0
    return tuple(i for _, i in sorted((sign * k, i) for i, k in zip(ids, keys)))


@dataclass(frozen=True)
class MatchSide:
    """One side of a matching market.

    ``quantity`` is supply for proposers and quota for acceptors. ``prefs``
    holds, per agent, a strict order over the ids of the opposite side.
    """

    agents: tuple[int, ...]
    quantity: tuple[float, ...]
    prefs: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not (len(self.agents) == len(self.quantity) == len(self.prefs)):
            raise ValueError("agents, quantity and prefs must have equal length")
        if any(q < 0 for q in self.quantity):
            raise ValueError("quantities must be non-negative")
        for pref in self.prefs:
            if len(set(pref)) != len(pref):
                raise ValueError("preference lists must not repeat agents")

    def __len__(self) -> int:
        return len(self.agents)

    def supply_of(self, agent: int) -> float:
        return self.quantity[self.agents.index(agent)]

    def pref_of(self, agent: int) -> tuple[int, ...]:
        return self.prefs[self.agents.index(agent)]


@dataclass(frozen=True)
class MatchState:
    round: int
    pointers: tuple[int, ...]
    flags: tuple[bool, ...]


@dataclass(frozen=True)
class BlockingPair:
    proposer: int
    acceptor: int
    quantity: float


@dataclass(frozen=True)
class MatchTrace:
    """Per-round record of a run, indexed by local proposer position."""

    proposers: tuple[int, ...]
    acceptors: tuple[int, ...]
    pointers: np.ndarray
    flags: np.ndarray
    targets: np.ndarray
    offered: np.ndarray
    accepted: np.ndarray

    @property
    def rounds(self) -> int:
        return self.pointers.shape[0]

    def states(self) -> list[MatchState]:
        return [
            MatchState(r + 1, tuple(int(x) for x in self.pointers[r]), tuple(bool(x) for x in self.flags[r]))
            for r in range(self.rounds)
        ]

    def rows(self) -> Iterator[dict]:
        """Rows of (round, proposer, acceptor, offered, accepted, rejected, flag)."""
        for r in range(self.rounds):
            for p, prop in enumerate(self.proposers):
                a = self.targets[r, p]
                if a < 0:
                    continue
                offered = float(self.offered[r, p])
                accepted = float(self.accepted[r, p])
                yield {
                    "round": r + 1,
                    "proposer": prop,
                    "acceptor": self.acceptors[a],
                    "offered": offered,
                    "accepted": accepted,
                    "rejected": offered - accepted,
                    "flag": bool(self.flags[r, p]),
                }

    def to_csv(self) -> str:
        buf = io.StringIO()
        fields = ["round", "proposer", "acceptor", "offered", "accepted", "rejected", "flag"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buf.getvalue()


@dataclass(frozen=True)
class MatchResult:
    allocation: Allocation
    trace: MatchTrace

    @property
    def rounds(self) -> int:
        return self.trace.rounds


def _encode(proposers: MatchSide, acceptors: MatchSide):
    acc_pos = {a: i for i, a in enumerate(acceptors.agents)}
    prop_pos = {p: i for i, p in enumerate(proposers.agents)}
    n_list = len(acceptors)
    pref = np.empty((len(proposers), n_list), np.int64)
    for p, order in enumerate(proposers.prefs):
        local = [acc_pos[a] for a in order if a in acc_pos]
        if len(local) != n_list:
            raise ValueError(f"proposer {proposers.agents[p]} must rank every acceptor")
        pref[p] = local
    acc_order = np.empty((len(acceptors), len(proposers)), np.int64)
    for a, order in enumerate(acceptors.prefs):
        local = [prop_pos[p] for p in order if p in prop_pos]
        if len(local) != len(proposers):
            raise ValueError(f"acceptor {acceptors.agents[a]} must rank every proposer")
        acc_order[a] = local
    supply = np.asarray(proposers.quantity, dtype=np.float64).reshape(len(proposers))
    demand = np.asarray(acceptors.quantity, dtype=np.float64).reshape(len(acceptors))
    return pref, acc_order, supply, demand


def run_matching(
    proposers: MatchSide,
    acceptors: MatchSide,
    kernel=None,
    max_rounds: Optional[int] = None,
) -> MatchResult:
    """Run deferred acceptance to completion.

    Stops once no proposer both has unplaced quantity and an unscanned
    acceptor left on its list.
    """
    kernel = kernel or _kernels.deferred_acceptance
    if not len(proposers) or not len(acceptors):
        n = len(proposers)
        empty = np.empty((0, n))
        trace = MatchTrace(
            proposers.agents,
            acceptors.agents,
            empty.astype(np.int64),
            empty.astype(bool),
            empty.astype(np.int64),
            empty,
            empty,
        )
        return MatchResult(Allocation(), trace)

    pref, acc_order, supply, demand = _encode(proposers, acceptors)
    if max_rounds is None:
        max_rounds = MAX_ROUNDS
    held, rounds, ptr, flag, target, offered, accepted = kernel(
        pref, acc_order, supply, demand, TOL, max_rounds
    )
    alloc = Allocation.from_dense(held, rows=acceptors.agents, cols=proposers.agents)
    trace = MatchTrace(proposers.agents, acceptors.agents, ptr, flag, target, offered, accepted)
    return MatchResult(alloc, trace)


def find_blocking_pair(
    allocation: Allocation, proposers: MatchSide, acceptors: MatchSide
) -> Optional[BlockingPair]:
    """Brute-force pairwise-stability check.

    A pair (P, A) blocks when P could free quantity (unplaced, or placed at
    an acceptor P ranks below A) and A could free room (unfilled quota, or
    quantity held from a proposer A ranks below P), both by more than TOL.
    """
    placed_by = {p: 0.0 for p in proposers.agents}
    held_by = {a: 0.0 for a in acceptors.agents}
    for (a, p), q in allocation.entries.items():
        placed_by[p] += q
        held_by[a] += q

    for p, supply, p_pref in zip(proposers.agents, proposers.quantity, proposers.prefs):
        p_rank = {a: r for r, a in enumerate(p_pref)}
        for a in p_pref:
            a_idx = acceptors.agents.index(a)
            quota = acceptors.quantity[a_idx]
            a_rank = {x: r for r, x in enumerate(acceptors.prefs[a_idx])}

            p_free = supply - placed_by[p] + sum(
                q for (a2, p2), q in allocation.entries.items() if p2 == p and p_rank[a2] > p_rank[a]
            )
            a_free = quota - held_by[a] + sum(
                q for (a2, p2), q in allocation.entries.items() if a2 == a and a_rank[p2] > a_rank[p]
            )
            movable = min(p_free, a_free)
            if movable > TOL:
                return BlockingPair(p, a, movable)
    return None


def assert_pointer_monotone(trace) -> Optional[str]:
    """None when every proposer's pointer never decreases, else a description."""
    if isinstance(trace, MatchTrace):
        pointers = trace.pointers
        names = trace.proposers
    else:
        pointers = np.array([s.pointers for s in trace]) if len(trace) else np.empty((0, 0))
        names = tuple(range(pointers.shape[1])) if pointers.ndim == 2 else ()
    if pointers.shape[0] < 2:
        return None
    drops = np.diff(pointers, axis=0) < 0
    if drops.any():
        r, p = map(int, np.argwhere(drops)[0])
        return (
            f"proposer {names[p]} pointer moved back from {pointers[r, p]} "
            f"to {pointers[r + 1, p]} at round {r + 2}"
        )
    return None


def build_dso_fn_sides(scenario: Scenario, pricing: PricingResult) -> tuple[MatchSide, MatchSide]:
    """FNs propose their capacity; DSOs accept up to their subscribers' purchases."""
    dso_ids = tuple(o.id for o in scenario.dsos)
    fn_ids = tuple(f.id for f in scenario.fns)
    demand = [0.0] * scenario.n_dso
    for j, d in enumerate(scenario.dsss):
        if pricing.participating[j]:
            demand[d.dso_pref[0]] += pricing.purchases[j]
    rents = [f.rent for f in scenario.fns]
    dso_pref = preference_order(fn_ids, rents)
    proposers = MatchSide(
        fn_ids,
        tuple(f.capacity for f in scenario.fns),
        tuple(preference_order(dso_ids, f.dso_weights, descending=True) for f in scenario.fns),
    )
    acceptors = MatchSide(dso_ids, tuple(demand), tuple(dso_pref for _ in dso_ids))
    return proposers, acceptors


def build_fn_dss_sides(
    scenario: Scenario,
    dso_id: int,
    dso_fn_alloc: Allocation,
    pricing: PricingResult,
) -> tuple[MatchSide, MatchSide]:
    """Sub-market of one DSO: its participating DSSs propose to the FNs it rented."""
    dss_ids = tuple(
        d.id for d in scenario.dsss if d.dso_pref[0] == dso_id and pricing.participating[d.id]
    )
    fn_ids = tuple(k for (i, k) in dso_fn_alloc.entries if i == dso_id)
    rents = [scenario.fns[k].rent for k in fn_ids]
    dss_pref = preference_order(fn_ids, rents)
    dist = scenario.fn_dss_distances()
    proposers = MatchSide(
        dss_ids,
        tuple(pricing.purchases[j] for j in dss_ids),
        tuple(dss_pref for _ in dss_ids),
    )
    acceptors = MatchSide(
        fn_ids,
        tuple(dso_fn_alloc.get(dso_id, k) for k in fn_ids),
        tuple(preference_order(dss_ids, [dist[k, j] for j in dss_ids]) for k in fn_ids),
    )
    return proposers, acceptors
