"""Random scenario generation and parameter sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .market import cloud_only_baseline, run_market
from .model import DsoAgent, DssAgent, FogNodeAgent, Point, Scenario

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("n_dss", "lambda_mean", "mu", "t_th", "n_fn")
CSV_HEADER = (
    "variable",
    "value",
    "replicate",
    "seed",
    "util_fn_total",
    "util_dso_total",
    "util_dss_total",
    "util_dss_baseline",
    "cloud_crbs",
)
# Arrival rates are kept below this fraction of mu * t_th.
LAMBDA_CLIP = 0.99


@dataclass(frozen=True)
class GeneratorParams:
    n_dss: int = 120
    n_dso: int = 4
    n_fn: int = 20
    district_diameter: float = 10.0
    mu: float = 0.1
    t_th: float = 60.0
    lambda_mean: float = 0.5
    rent_range: tuple[float, float] = (0.0, 10.0)
    capacity_range: tuple[float, float] = (0.0, 100.0)
    alpha: float = 50.0
    beta: float = 0.01
    gamma: float = 0.001
    theta: float = 1.0 / 50.0
    kappa: float = 0.1
    cloud_distance: float = 100.0
    cloud_unit_cost: float = 10.0
    seed: int = 42

    def __post_init__(self):
        for name in ("n_dss", "n_dso", "n_fn"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 0:
                raise ValueError(f"{name} must be a non-negative integer")
        for name in ("rent_range", "capacity_range"):
            lo, hi = getattr(self, name)
            if not (0 <= lo <= hi):
                raise ValueError(f"{name} must satisfy 0 <= low <= high")
        if self.district_diameter < 0:
            raise ValueError("district_diameter must be >= 0")
        if self.lambda_mean <= 0:
            raise ValueError("lambda_mean must be > 0")
        if self.mu <= 0 or self.t_th <= 0:
            raise ValueError("mu and t_th must be > 0")

    def replace(self, **changes) -> "GeneratorParams":
        if "n_dss" in changes or "n_dso" in changes or "n_fn" in changes:
            for key in ("n_dss", "n_dso", "n_fn"):
                if key in changes:
                    changes[key] = int(changes[key])
        return dataclasses.replace(self, **changes)


def _agent_rng(seed: int, tier: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tier, index)))


def _disk_point(rng: np.random.Generator, diameter: float) -> Point:
    radius = diameter / 2.0 * math.sqrt(rng.uniform(0.0, 1.0))
    phi = rng.uniform(0.0, 2.0 * math.pi)
    return Point(radius * math.cos(phi), radius * math.sin(phi))


def generate_scenario(params: GeneratorParams) -> Scenario:
    """Draw one random scenario; identical params give identical scenarios.

    Every agent draws from its own child stream of the seed (DSS j from
    spawn key (0, j), FN k from (1, k)), so growing a population keeps the
    existing agents and rescaling lambda_mean rescales the same draws.
    """
    bound = params.mu * params.t_th
    lam_max = LAMBDA_CLIP * bound
    n_clipped = 0
    dsss = []
    for j in range(params.n_dss):
        rng = _agent_rng(params.seed, 0, j)
        lam = 2.0 * params.lambda_mean * rng.uniform(0.0, 1.0)
        if lam >= lam_max:
            lam = lam_max
            n_clipped += 1
        lam = max(lam, np.finfo(float).tiny)
        pos = _disk_point(rng, params.district_diameter)
        dsss.append(
            DssAgent(
                id=j,
                position=pos,
                arrival_rate=lam,
                alpha=params.alpha,
                beta=params.beta,
                gamma=params.gamma,
                dso_pref=tuple(int(i) for i in rng.permutation(params.n_dso)),
            )
        )
    if n_clipped:
        log.info("clipped %d of %d arrival rates to %.6g", n_clipped, params.n_dss, lam_max)

    fns = []
    for k in range(params.n_fn):
        rng = _agent_rng(params.seed, 1, k)
        pos = _disk_point(rng, params.district_diameter)
        fns.append(
            FogNodeAgent(
                id=k,
                position=pos,
                rent=float(rng.uniform(*params.rent_range)),
                capacity=float(rng.uniform(*params.capacity_range)),
                dso_weights=tuple(float(w) for w in rng.uniform(0.0, 1.0, params.n_dso)),
            )
        )
    dsos = tuple(DsoAgent(id=i, cloud_unit_cost=params.cloud_unit_cost) for i in range(params.n_dso))
    return Scenario(
        dsss=tuple(dsss),
        dsos=dsos,
        fns=tuple(fns),
        mu=params.mu,
        t_th=params.t_th,
        theta=params.theta,
        kappa=params.kappa,
        cloud_distance=params.cloud_distance,
        seed=params.seed,
    )


def replicate_seed(base_seed: int, replicate: int) -> int:
    """Seed of replicate ``replicate``: SeedSequence([base, replicate]) -> uint32.

    The grid value does not enter the seed, so every grid point of a sweep
    sees the same random agents (common random numbers) and adding or
    reordering grid points changes no other point.
    """
    ss = np.random.SeedSequence([base_seed, replicate])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple[float, ...]
    replications: int = 30
    base: GeneratorParams = GeneratorParams()

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}")
        if not self.grid:
            raise ValueError("grid must not be empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        object.__setattr__(self, "grid", tuple(self.grid))


def _run_cell(task) -> dict[str, Any]:
    variable, value, g, rep, params = task
    seed = replicate_seed(params.seed, rep)
    row: dict[str, Any] = {"variable": variable, "value": value, "replicate": rep, "seed": seed}
    try:
        scenario = generate_scenario(params.replace(**{variable: value}, seed=seed))
        fog = run_market(scenario)
        base = cloud_only_baseline(scenario)
    except (ValueError, RuntimeError) as exc:
        log.warning("sweep point %s=%s rep %d failed: %s", variable, value, rep, exc)
        nan = math.nan
        row.update(
            util_fn_total=nan, util_dso_total=nan, util_dss_total=nan, util_dss_baseline=nan, cloud_crbs=nan
        )
        return row
    row.update(
        util_fn_total=fog.utilities.fn_total,
        util_dso_total=fog.utilities.dso_total,
        util_dss_total=fog.utilities.dss_total,
        util_dss_baseline=base.utilities.dss_total,
        cloud_crbs=fog.utilities.cloud_total,
    )
    return row


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[dict[str, Any]]:
    """One row per (grid value, replicate), ordered by grid index then replicate."""
    tasks = [
        (spec.variable, value, g, rep, spec.base)
        for g, value in enumerate(spec.grid)
        for rep in range(spec.replications)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_run_cell(t) for t in tasks]


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_HEADER])
    return buf.getvalue()


def rows_to_json(rows: Sequence[dict[str, Any]]) -> str:
    return json.dumps([{c: row[c] for c in CSV_HEADER} for row in rows], indent=2) + "\n"


def summarize(rows: Sequence[dict[str, Any]], column: str) -> tuple[np.ndarray, np.ndarray]:
    """Grid values and the per-value mean of ``column``, in grid order."""
    values = []
    for row in rows:
        if row["value"] not in values:
            values.append(row["value"])
    means = [np.mean([r[column] for r in rows if r["value"] == v]) for v in values]
    return np.array(values, dtype=float), np.array(means)
