"""Deferred-acceptance round loop for quantity matching.

Two implementations with one signature:

* ``deferred_acceptance_loop`` - explicit loops, compiled with numba ``@njit``.
* ``deferred_acceptance_numpy`` - vectorised numpy, no compilation.

``deferred_acceptance`` is the loop kernel when numba imports and
``FOGMARKET_DISABLE_NUMBA`` is unset (or "0"), otherwise the numpy version.

Arguments (all local indices):
    pref      (P, L) int64   acceptor ids in each proposer's order
    acc_order (A, P) int64   proposer ids in each acceptor's order
    supply    (P,)   float64 quantity each proposer wants placed
    demand    (A,)   float64 quota of each acceptor
    tol       float          quantities at or below tol count as zero
    max_rounds int           safety stop; exceeding it raises RuntimeError

Returns ``(held, rounds, ptr, flag, target, offered, accepted)`` where
``held`` is the final (A, P) allocation and the remaining arrays are
per-round traces with ``rounds`` rows. ``target`` is -1 for proposers that
made no offer in that round.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

NUMBA_DISABLED = os.environ.get("FOGMARKET_DISABLE_NUMBA", "").strip().lower() not in (
    "",
    "0",
    "false",
    "no",
)
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def deferred_acceptance_loop(pref, acc_order, supply, demand, tol, max_rounds):
    n_prop, n_list = pref.shape
    n_acc = demand.shape[0]
    held = np.zeros((n_acc, n_prop))
    ptr = np.zeros(n_prop, np.int64)
    flag = np.ones(n_prop, np.bool_)

    cap = n_prop * n_list + 2
    tr_ptr = np.empty((cap, n_prop), np.int64)
    tr_flag = np.empty((cap, n_prop), np.bool_)
    tr_target = np.empty((cap, n_prop), np.int64)
    tr_offer = np.empty((cap, n_prop))
    tr_accept = np.empty((cap, n_prop))

    target = np.empty(n_prop, np.int64)
    offer = np.empty(n_prop)
    got_offer = np.empty(n_acc, np.bool_)
    rounds = 0
    while True:
        any_active = False
        for a in range(n_acc):
            got_offer[a] = False
        for p in range(n_prop):
            target[p] = -1
            offer[p] = 0.0
            placed = 0.0
            for a in range(n_acc):
                placed += held[a, p]
            remaining = supply[p] - placed
            if remaining > tol and ptr[p] < n_list:
                any_active = True
                if not flag[p]:
                    ptr[p] += 1
                flag[p] = False
                if ptr[p] < n_list:
                    target[p] = pref[p, ptr[p]]
                    offer[p] = remaining
                    got_offer[target[p]] = True
        if not any_active:
            break
        if rounds >= max_rounds:
            raise RuntimeError("deferred acceptance exceeded max_rounds")

        if rounds == cap:
            cap *= 2
            new_ptr = np.empty((cap, n_prop), np.int64)
            new_flag = np.empty((cap, n_prop), np.bool_)
            new_target = np.empty((cap, n_prop), np.int64)
            new_offer = np.empty((cap, n_prop))
            new_accept = np.empty((cap, n_prop))
            new_ptr[:rounds] = tr_ptr[:rounds]
            new_flag[:rounds] = tr_flag[:rounds]
            new_target[:rounds] = tr_target[:rounds]
            new_offer[:rounds] = tr_offer[:rounds]
            new_accept[:rounds] = tr_accept[:rounds]
            tr_ptr, tr_flag, tr_target = new_ptr, new_flag, new_target
            tr_offer, tr_accept = new_offer, new_accept

        for p in range(n_prop):
            tr_accept[rounds, p] = 0.0
        for a in range(n_acc):
            if not got_offer[a]:
                continue
            left = demand[a]
            for idx in range(n_prop):
                p = acc_order[a, idx]
                old = held[a, p]
                pool = old
                if target[p] == a:
                    pool += offer[p]
                take = pool if pool < left else left
                if take <= tol:
                    take = 0.0
                if take < old - tol:
                    flag[p] = True
                if target[p] == a and take > old:
                    tr_accept[rounds, p] = take - old
                held[a, p] = take
                left -= take

        for p in range(n_prop):
            tr_ptr[rounds, p] = ptr[p]
            tr_flag[rounds, p] = flag[p]
            tr_target[rounds, p] = target[p]
            tr_offer[rounds, p] = offer[p]
        rounds += 1

    return (
        held,
        rounds,
        tr_ptr[:rounds].copy(),
        tr_flag[:rounds].copy(),
        tr_target[:rounds].copy(),
        tr_offer[:rounds].copy(),
        tr_accept[:rounds].copy(),
    )


def deferred_acceptance_numpy(pref, acc_order, supply, demand, tol, max_rounds):
    n_prop, n_list = pref.shape
    n_acc = demand.shape[0]
    held = np.zeros((n_acc, n_prop))
    ptr = np.zeros(n_prop, np.int64)
    flag = np.ones(n_prop, bool)
    trace = []

    while True:
        remaining = supply - held.sum(axis=0)
        active = (remaining > tol) & (ptr < n_list)
        if not active.any():
            break
        if len(trace) >= max_rounds:
            raise RuntimeError("deferred acceptance exceeded max_rounds")
        ptr[active & ~flag] += 1
        flag[active] = False
        offering = active & (ptr < n_list)
        target = np.full(n_prop, -1, np.int64)
        target[offering] = pref[offering, ptr[offering]]
        offer = np.where(offering, remaining, 0.0)
        accepted = np.zeros(n_prop)

        touched = np.unique(target[offering])
        if touched.size:
            old = held[touched]
            pool = old.copy()
            hit = target[None, :] == touched[:, None]
            pool[hit] += np.broadcast_to(offer, pool.shape)[hit]
            order = acc_order[touched]
            pool_o = np.take_along_axis(pool, order, axis=1)
            before = np.zeros_like(pool_o)
            np.cumsum(pool_o[:, :-1], axis=1, out=before[:, 1:])
            take_o = np.clip(demand[touched, None] - before, 0.0, pool_o)
            take_o[take_o <= tol] = 0.0
            new = np.empty_like(take_o)
            np.put_along_axis(new, order, take_o, axis=1)
            flag |= (new < old - tol).any(axis=0)
            gain = np.where(hit, np.maximum(new - old, 0.0), 0.0).sum(axis=0)
            accepted[offering] = gain[offering]
            held[touched] = new

        trace.append((ptr.copy(), flag.copy(), target, offer, accepted))

    rounds = len(trace)
    if rounds:
        tr_ptr, tr_flag, tr_target, tr_offer, tr_accept = (np.array(x) for x in zip(*trace))
    else:
        tr_ptr = np.empty((0, n_prop), np.int64)
        tr_flag = np.empty((0, n_prop), bool)
        tr_target = np.empty((0, n_prop), np.int64)
        tr_offer = np.empty((0, n_prop))
        tr_accept = np.empty((0, n_prop))
    return held, rounds, tr_ptr, tr_flag, tr_target, tr_offer, tr_accept


if HAVE_NUMBA:
    deferred_acceptance_jit = numba.njit(cache=True)(deferred_acceptance_loop)
else:  # pragma: no cover
    deferred_acceptance_jit = None

deferred_acceptance = deferred_acceptance_jit if USE_NUMBA else deferred_acceptance_numpy
