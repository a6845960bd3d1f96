import math

import numpy as np
import pytest

from fogmarket.equilibrium import queueing_cost

from fogmarket.matching import MatchSide, preference_order
from fogmarket.model import DsoAgent, DssAgent, FogNodeAgent, Point, Scenario

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo, hi, tol=1e-12, max_iter=500):
    """Maximise a unimodal f on [lo, hi] by golden-section search."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def follower_utility(lam, mu, r, beta, gamma, alpha=50.0):
    """Subscriber utility in q, written out independently of the package."""

    def w(q):
        return alpha * lam - beta * q * r - gamma * lam / (mu - lam / q)

    return w


def brute_force_purchase(lam, mu, r, beta, gamma):
    """Golden-section maximiser of the follower utility over the excess q - lam/mu."""
    w = follower_utility(lam, mu, r, beta, gamma)
    base = lam / mu
    hi = base
    # expand until the utility turns down
    while w(base + 2 * hi) > w(base + hi):
        hi *= 2.0
    x = golden_max(lambda x: w(base + x), 0.0, 2.0 * hi)
    return base + x


def random_layer_instance(rng, layer):
    """Small random market shaped like one of the two matching layers.

    DSO-FN: acceptors (DSOs) share one ranking of proposers (by rent);
    proposers (FNs) rank acceptors by random weights. FN-DSS: proposers
    (DSSs) share one ranking of acceptors (by rent); acceptors (FNs) rank
    proposers by distance.
    """
    n_acc = int(rng.integers(2, 5))
    n_prop = int(rng.integers(3, 7))
    acc = tuple(range(n_acc))
    prop = tuple(range(n_prop))
    supply = tuple(float(x) for x in 20.0 - rng.uniform(0.0, 20.0, n_prop))
    demand = tuple(float(x) for x in 20.0 - rng.uniform(0.0, 20.0, n_acc))
    if layer == "dso_fn":
        rents = rng.uniform(0, 10, n_prop)
        common = preference_order(prop, rents)
        p_prefs = tuple(preference_order(acc, rng.uniform(0, 1, n_acc), descending=True) for _ in prop)
        a_prefs = tuple(common for _ in acc)
    elif layer == "fn_dss":
        rents = rng.uniform(0, 10, n_acc)
        common = preference_order(acc, rents)
        fn_xy = rng.uniform(-5, 5, (n_acc, 2))
        dss_xy = rng.uniform(-5, 5, (n_prop, 2))
        p_prefs = tuple(common for _ in prop)
        a_prefs = tuple(
            preference_order(prop, np.hypot(*(dss_xy - fn_xy[a]).T)) for a in acc
        )
    else:
        raise ValueError(layer)
    return MatchSide(prop, supply, p_prefs), MatchSide(acc, demand, a_prefs)


def default_dss(j=0, pos=(0.0, 0.0), lam=0.5, pref=(0,)):
    return DssAgent(j, Point(*pos), lam, 50.0, 0.01, 0.001, tuple(pref))


def single_market(fn_capacity=100.0, fn_rent=1.0, fn_pos=(0.0, 0.0), n_fn=1, cloud_cost=10.0):
    fns = tuple(
        FogNodeAgent(k, Point(*fn_pos), fn_rent, fn_capacity, (0.8,)) for k in range(n_fn)
    )
    return Scenario(
        dsss=(default_dss(),),
        dsos=(DsoAgent(0, cloud_cost),),
        fns=fns,
        mu=0.1,
        t_th=60.0,
        theta=0.02,
        kappa=0.1,
        cloud_distance=100.0,
        seed=0,
    )


def check_invariants(s, out):
    for i in range(s.n_dso):
        served = math.fsum(out.purchases[j] for j in range(s.n_dss) if out.subscription[j] == i and out.participating[j])
        got = out.dso_fn.row_total(i) + out.dso_fn.cloud.get(i, 0.0)
        assert abs(got - served) <= 1e-6
    for fn in s.fns:
        assert out.dso_fn.col_total(fn.id) <= fn.capacity + 1e-9
    for (i, k), rented in out.dso_fn.entries.items():
        used = math.fsum(q for (kk, j), q in out.fn_dss.entries.items() if kk == k and out.subscription[j] == i)
        assert used <= rented + 1e-9
    for j, d in enumerate(s.dsss):
        if not out.participating[j]:
            continue
        assert abs(out.fn_dss.col_total(j) + out.dss_cloud_share(j) - out.purchases[j]) <= 1e-6
        assert queueing_cost(d.arrival_rate, s.mu, out.purchases[j]) <= s.t_th + 1e-9
    u = out.utilities
    assert all(math.isfinite(x) for x in u.dss + u.dso + u.fn + u.cloud)
    assert u.dss_total == pytest.approx(math.fsum(u.dss))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
