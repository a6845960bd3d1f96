import itertools

import numpy as np
import pytest

from fogmarket.equilibrium import set_prices, subscribe
from fogmarket.matching import (
    MatchSide,
    MatchState,
    assert_pointer_monotone,
    build_dso_fn_sides,
    build_fn_dss_sides,
    find_blocking_pair,
    preference_order,
    run_matching,
)
from fogmarket.model import TOL, Allocation, DsoAgent, FogNodeAgent, Point, Scenario

from conftest import default_dss, random_layer_instance


def two_fn_market():
    # FN1 = id 0 (price 5), FN2 = id 1 (price 3); both prefer d1 = id 0
    fns = MatchSide((0, 1), (10.0, 10.0), ((0, 1), (0, 1)))
    dsos = MatchSide((0, 1), (10.0, 10.0), (preference_order((0, 1), (5.0, 3.0)),) * 2)
    return fns, dsos


class TestExamples:
    def test_single_acceptor_split(self):
        props = MatchSide((0, 1), (6.0, 8.0), ((0,), (0,)))
        acc = MatchSide((0,), (10.0,), (preference_order((0, 1), (2.0, 5.0)),))
        res = run_matching(props, acc)
        assert res.allocation.entries == {(0, 0): 6.0, (0, 1): 4.0}
        assert find_blocking_pair(res.allocation, props, acc) is None

    def test_single_acceptor_split_unique_by_enumeration(self):
        props = MatchSide((0, 1), (6.0, 8.0), ((0,), (0,)))
        acc = MatchSide((0,), (10.0,), ((0, 1),))
        stable = []
        grid = np.round(np.arange(0.0, 10.0001, 0.25), 10)
        for a, b in itertools.product(grid, grid):
            if a > 6 or b > 8 or a + b > 10:
                continue
            alloc = Allocation({(0, 0): a, (0, 1): b})
            if find_blocking_pair(alloc, props, acc) is None:
                stable.append((a, b))
        assert stable == [(6.0, 4.0)]

    def test_two_fn_trace(self):
        fns, dsos = two_fn_market()
        res = run_matching(fns, dsos)
        assert res.allocation.entries == {(0, 1): 10.0, (1, 0): 10.0}
        rows = list(res.trace.rows())
        first = [r for r in rows if r["round"] == 1]
        assert {(r["proposer"], r["acceptor"]) for r in first} == {(0, 0), (1, 0)}
        assert [r["accepted"] for r in first if r["proposer"] == 0] == [0.0]
        assert find_blocking_pair(res.allocation, fns, dsos) is None

    def test_swapped_allocation_blocks(self):
        fns, dsos = two_fn_market()
        swapped = Allocation({(0, 0): 10.0, (1, 1): 10.0})
        bp = find_blocking_pair(swapped, fns, dsos)
        assert (bp.proposer, bp.acceptor) == (1, 0)
        assert bp.quantity == pytest.approx(10.0)

    def test_no_proposers(self):
        res = run_matching(MatchSide((), (), ()), MatchSide((0,), (5.0,), ((),)))
        assert res.allocation == Allocation()
        assert res.rounds == 0

    def test_no_acceptors(self):
        res = run_matching(MatchSide((0,), (5.0,), ((),)), MatchSide((), (), ()))
        assert res.allocation == Allocation() and res.rounds == 0

    def test_empty_allocation_zero_demand_is_stable(self):
        props = MatchSide((0,), (0.0,), ((0,),))
        acc = MatchSide((0,), (0.0,), ((0,),))
        assert find_blocking_pair(Allocation(), props, acc) is None


class TestPointerMonotone:
    def test_engine_trace(self):
        fns, dsos = two_fn_market()
        assert assert_pointer_monotone(run_matching(fns, dsos).trace) is None

    def test_synthetic_violation(self):
        states = [MatchState(1, (0, 3), (False, False)), MatchState(2, (1, 2), (False, False))]
        msg = assert_pointer_monotone(states)
        assert msg is not None and "proposer 1" in msg

    def test_empty(self):
        assert assert_pointer_monotone([]) is None


def test_preference_order_ties():
    assert preference_order((0, 1, 2), (5.0, 3.0, 5.0)) == (1, 0, 2)
    assert preference_order((0, 1, 2), (0.5, 0.9, 0.9), descending=True) == (1, 2, 0)
    assert preference_order((4, 2), (1.0, 1.0)) == (2, 4)


def test_match_side_validation():
    with pytest.raises(ValueError):
        MatchSide((0,), (1.0, 2.0), ((0,),))
    with pytest.raises(ValueError):
        MatchSide((0,), (-1.0,), ((0,),))
    with pytest.raises(ValueError):
        MatchSide((0,), (1.0,), ((0, 0),))


def _check_instance(props, accs):
    res = run_matching(props, accs)
    alloc = res.allocation
    assert find_blocking_pair(alloc, props, accs) is None
    assert assert_pointer_monotone(res.trace) is None
    assert res.rounds <= len(props) * len(accs) + 1
    for a, quota in zip(accs.agents, accs.quantity):
        assert alloc.row_total(a) <= quota + 1e-9
    for p, supply in zip(props.agents, props.quantity):
        assert alloc.col_total(p) <= supply + 1e-9
    # greediness: while A keeps quantity from P, nobody A ranks above P is
    # left with unplaced supply
    for a, a_pref in zip(accs.agents, accs.prefs):
        for rank, p in enumerate(a_pref):
            if alloc.get(a, p) > TOL:
                for better in a_pref[:rank]:
                    assert props.supply_of(better) - alloc.col_total(better) <= 1e-9
    return res


@pytest.mark.parametrize("layer", ["dso_fn", "fn_dss"])
def test_random_layer_instances(layer):
    rng = np.random.default_rng(2024)
    for _ in range(200):
        _check_instance(*random_layer_instance(rng, layer))


@pytest.mark.parametrize("layer", ["dso_fn", "fn_dss"])
def test_determinism(layer):
    props, accs = random_layer_instance(np.random.default_rng(7), layer)
    a = run_matching(props, accs)
    b = run_matching(props, accs)
    assert a.allocation == b.allocation
    assert np.array_equal(a.trace.pointers, b.trace.pointers)


def test_cyclic_preferences_can_exceed_round_bound():
    # Both sides with unrelated cyclic preferences: a displaced chunk circulates
    # among acceptors that each strictly improve, so the run is long but still
    # ends in a stable allocation. Layer-shaped markets never do this.
    props = MatchSide(
        (0, 1, 2, 3, 4, 5),
        (13.404733057701467, 11.534696239577237, 10.387506298668312,
         9.550692872865485, 4.009404614407317, 7.792698855429605),
        ((2, 0, 1), (0, 1, 2), (1, 2, 0), (1, 0, 2), (1, 2, 0), (2, 0, 1)),
    )
    accs = MatchSide(
        (0, 1, 2),
        (7.929664565578807, 8.179423933984394, 19.364375884873848),
        ((0, 2, 5, 1, 4, 3), (5, 4, 0, 2, 1, 3), (4, 2, 0, 5, 3, 1)),
    )
    res = run_matching(props, accs)
    assert res.rounds > len(props) * len(accs) + 1
    assert find_blocking_pair(res.allocation, props, accs) is None
    assert assert_pointer_monotone(res.trace) is None


def test_max_rounds_guard():
    fns, dsos = two_fn_market()
    with pytest.raises(RuntimeError):
        run_matching(fns, dsos, max_rounds=1)


def test_trace_csv():
    fns, dsos = two_fn_market()
    text = run_matching(fns, dsos).trace.to_csv()
    lines = text.splitlines()
    assert lines[0] == "round,proposer,acceptor,offered,accepted,rejected,flag"
    assert lines[1:3] == ["1,0,0,10.0,0.0,10.0,False", "1,1,0,10.0,10.0,0.0,False"]


def _sides_scenario():
    dsss = (
        default_dss(0, pos=(0, 0), pref=(0, 1)),
        default_dss(1, pos=(5, 0), pref=(0, 1)),
        default_dss(2, pos=(0, 1), pref=(1, 0)),
    )
    fns = (
        FogNodeAgent(0, Point(4, 0), 3.0, 50.0, (0.2, 0.9)),
        FogNodeAgent(1, Point(0, 0), 1.0, 2.0, (0.7, 0.7)),
    )
    return Scenario(dsss=dsss, dsos=(DsoAgent(0), DsoAgent(1)), fns=fns, theta=0.02)


def test_build_dso_fn_sides():
    s = _sides_scenario()
    pricing = set_prices(s, subscribe(s))
    props, accs = build_dso_fn_sides(s, pricing)
    assert props.agents == (0, 1) and props.quantity == (50.0, 2.0)
    assert props.prefs == ((1, 0), (0, 1))
    assert accs.prefs == ((1, 0), (1, 0))
    assert accs.quantity[0] == pytest.approx(pricing.purchases[0] + pricing.purchases[1])
    assert accs.quantity[1] == pytest.approx(pricing.purchases[2])


def test_build_fn_dss_sides():
    s = _sides_scenario()
    pricing = set_prices(s, subscribe(s))
    rented = Allocation({(0, 0): 4.0, (0, 1): 2.0})
    props, accs = build_fn_dss_sides(s, 0, rented, pricing)
    assert props.agents == (0, 1)
    assert props.prefs == ((1, 0), (1, 0))
    assert accs.agents == (0, 1) and accs.quantity == (4.0, 2.0)
    assert accs.prefs == ((1, 0), (0, 1))
    props, accs = build_fn_dss_sides(s, 1, rented, pricing)
    assert props.agents == (2,) and accs.agents == ()
