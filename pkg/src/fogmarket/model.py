"""Domain types, geometry and the scenario file schema."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

TOL = 1e-9


class ScenarioError(ValueError):
    """Raised when a scenario violates one or more invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Point:
    x: float
    y: float


def distance(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class DssAgent:
    id: int
    position: Point
    arrival_rate: float
    alpha: float
    beta: float
    gamma: float
    dso_pref: tuple[int, ...]


@dataclass(frozen=True)
class DsoAgent:
    id: int
    cloud_unit_cost: float = 10.0


@dataclass(frozen=True)
class FogNodeAgent:
    id: int
    position: Point
    rent: float
    capacity: float
    dso_weights: tuple[float, ...]


@dataclass(frozen=True)
class Scenario:
    """Immutable world description.

    Agent ids are their positions in the respective lists. Construction
    raises :class:`ScenarioError` listing every violated invariant.
    """

    dsss: tuple[DssAgent, ...] = ()
    dsos: tuple[DsoAgent, ...] = ()
    fns: tuple[FogNodeAgent, ...] = ()
    mu: float = 0.1
    t_th: float = 60.0
    theta: float = 1.0 / 50.0
    kappa: float = 0.1
    cloud_distance: float = 100.0
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("dsss", "dsos", "fns"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        violations = _collect_violations(self)
        if violations:
            raise ScenarioError(violations)

    @property
    def n_dss(self) -> int:
        return len(self.dsss)

    @property
    def n_dso(self) -> int:
        return len(self.dsos)

    @property
    def n_fn(self) -> int:
        return len(self.fns)

    def fn_dss_distances(self) -> np.ndarray:
        """(K, N) matrix of FN-to-DSS distances in km."""
        if not self.fns or not self.dsss:
            return np.zeros((len(self.fns), len(self.dsss)))
        f = np.array([[fn.position.x, fn.position.y] for fn in self.fns])
        s = np.array([[d.position.x, d.position.y] for d in self.dsss])
        return np.hypot(f[:, None, 0] - s[None, :, 0], f[:, None, 1] - s[None, :, 1])

    def diameter(self) -> float:
        """Largest distance between any two DSS/FN positions."""
        pts = [a.position for a in self.dsss] + [f.position for f in self.fns]
        if len(pts) < 2:
            return 0.0
        xy = np.array([[p.x, p.y] for p in pts])
        diff = xy[:, None, :] - xy[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def to_dict(self) -> dict[str, Any]:
        return {
            "mu": self.mu,
            "t_th": self.t_th,
            "theta": self.theta,
            "kappa": self.kappa,
            "cloud_distance": self.cloud_distance,
            "seed": self.seed,
            "dsss": [
                {
                    "id": d.id,
                    "position": {"x": d.position.x, "y": d.position.y},
                    "arrival_rate": d.arrival_rate,
                    "alpha": d.alpha,
                    "beta": d.beta,
                    "gamma": d.gamma,
                    "dso_pref": list(d.dso_pref),
                }
                for d in self.dsss
            ],
            "dsos": [{"id": o.id, "cloud_unit_cost": o.cloud_unit_cost} for o in self.dsos],
            "fns": [
                {
                    "id": f.id,
                    "position": {"x": f.position.x, "y": f.position.y},
                    "rent": f.rent,
                    "capacity": f.capacity,
                    "dso_weights": list(f.dso_weights),
                }
                for f in self.fns
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Scenario":
        return cls(**_fields_from_dict(doc))


def _point(obj: Mapping[str, Any]) -> Point:
    return Point(float(obj["x"]), float(obj["y"]))


def _fields_from_dict(doc: Mapping[str, Any]) -> dict[str, Any]:
    dsss = tuple(
        DssAgent(
            id=int(d["id"]),
            position=_point(d["position"]),
            arrival_rate=float(d["arrival_rate"]),
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            gamma=float(d["gamma"]),
            dso_pref=tuple(int(i) for i in d["dso_pref"]),
        )
        for d in doc.get("dsss", [])
    )
    dsos = tuple(
        DsoAgent(id=int(o["id"]), cloud_unit_cost=float(o["cloud_unit_cost"]))
        for o in doc.get("dsos", [])
    )
    fns = tuple(
        FogNodeAgent(
            id=int(f["id"]),
            position=_point(f["position"]),
            rent=float(f["rent"]),
            capacity=float(f["capacity"]),
            dso_weights=tuple(float(w) for w in f["dso_weights"]),
        )
        for f in doc.get("fns", [])
    )
    seed = doc.get("seed")
    return dict(
        dsss=dsss,
        dsos=dsos,
        fns=fns,
        mu=float(doc["mu"]),
        t_th=float(doc["t_th"]),
        theta=float(doc["theta"]),
        kappa=float(doc["kappa"]),
        cloud_distance=float(doc["cloud_distance"]),
        seed=None if seed is None else int(seed),
    )


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def _collect_violations(s: Any) -> list[str]:
    out = []
    if not (_finite(s.mu) and s.mu > 0):
        out.append(f"mu must be > 0 (got {s.mu})")
    if not (_finite(s.t_th) and s.t_th > 0):
        out.append(f"t_th must be > 0 (got {s.t_th})")
    if not (_finite(s.theta) and s.theta >= 0):
        out.append(f"theta must be >= 0 (got {s.theta})")
    if not (_finite(s.kappa) and s.kappa >= 0):
        out.append(f"kappa must be >= 0 (got {s.kappa})")
    if not (_finite(s.cloud_distance) and s.cloud_distance >= 0):
        out.append(f"cloud_distance must be >= 0 (got {s.cloud_distance})")

    m = len(s.dsos)
    for kind, agents in (("DSS", s.dsss), ("DSO", s.dsos), ("FN", s.fns)):
        for idx, a in enumerate(agents):
            if a.id != idx:
                out.append(f"{kind} at index {idx} has id {a.id}; ids must equal list position")

    bound = s.mu * s.t_th
    for d in s.dsss:
        j = d.id
        if not _finite(d.position.x, d.position.y):
            out.append(f"DSS {j}: non-finite position")
        if not (_finite(d.arrival_rate) and d.arrival_rate > 0):
            out.append(f"DSS {j}: arrival_rate must be > 0 (got {d.arrival_rate})")
        elif d.arrival_rate >= bound:
            out.append(
                f"DSS {j}: delay bound unsatisfiable "
                f"(arrival_rate {d.arrival_rate} >= mu*t_th {bound})"
            )
        for name in ("alpha", "beta", "gamma"):
            v = getattr(d, name)
            if not (_finite(v) and v > 0):
                out.append(f"DSS {j}: {name} must be > 0 (got {v})")
        if sorted(d.dso_pref) != list(range(m)):
            out.append(f"DSS {j}: dso_pref must be a permutation of all {m} DSO ids")

    for o in s.dsos:
        if not (_finite(o.cloud_unit_cost) and o.cloud_unit_cost >= 0):
            out.append(f"DSO {o.id}: cloud_unit_cost must be >= 0 (got {o.cloud_unit_cost})")

    for f in s.fns:
        k = f.id
        if not _finite(f.position.x, f.position.y):
            out.append(f"FN {k}: non-finite position")
        if not (_finite(f.rent) and f.rent >= 0):
            out.append(f"FN {k}: rent must be >= 0 (got {f.rent})")
        if not (_finite(f.capacity) and f.capacity >= 0):
            out.append(f"FN {k}: capacity must be >= 0 (got {f.capacity})")
        if len(f.dso_weights) != m:
            out.append(f"FN {k}: dso_weights must have {m} entries (got {len(f.dso_weights)})")
        elif not all(_finite(w) and 0.0 <= w <= 1.0 for w in f.dso_weights):
            out.append(f"FN {k}: dso_weights must lie in [0, 1]")
    return out


def validate_scenario(s: Union[Scenario, Mapping[str, Any]]) -> list[str]:
    """Return every violated invariant; an empty list means the scenario is valid.

    Accepts a constructed :class:`Scenario` (always valid) or a raw scenario
    document, which is checked without being constructed.
    """
    if isinstance(s, Scenario):
        return _collect_violations(s)
    try:
        fields = _fields_from_dict(s)
    except (KeyError, TypeError, ValueError) as exc:
        return [f"malformed scenario document: {exc!r}"]
    return _collect_violations(SimpleNamespace(**fields))


def load_scenario_doc(path: Union[str, Path]) -> dict[str, Any]:
    with open(path) as fh:
        return json.load(fh)


def load_scenario(path: Union[str, Path]) -> Scenario:
    return Scenario.from_dict(load_scenario_doc(path))


def save_scenario(s: Scenario, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(s.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class Allocation:
    """Sparse CRB quantities between two tiers.

    ``entries`` maps ``(row, col)`` to a positive quantity; ``cloud`` maps a
    row id to its cloud-served quantity (DSO-FN layer only). Quantities at
    or below ``TOL`` are never stored.
    """

    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    cloud: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        entries = {}
        for key, q in self.entries.items():
            if q < -TOL:
                raise ValueError(f"negative quantity {q} at {key}")
            if q > TOL:
                entries[(int(key[0]), int(key[1]))] = float(q)
        cloud = {}
        for key, q in self.cloud.items():
            if q < -TOL:
                raise ValueError(f"negative cloud quantity {q} at {key}")
            if q > TOL:
                cloud[int(key)] = float(q)
        object.__setattr__(self, "entries", dict(sorted(entries.items())))
        object.__setattr__(self, "cloud", dict(sorted(cloud.items())))

    @classmethod
    def from_dense(
        cls,
        matrix: np.ndarray,
        rows: Optional[Sequence[int]] = None,
        cols: Optional[Sequence[int]] = None,
        cloud: Optional[Mapping[int, float]] = None,
    ) -> "Allocation":
        matrix = np.asarray(matrix, dtype=float)
        rows = range(matrix.shape[0]) if rows is None else rows
        cols = range(matrix.shape[1]) if cols is None else cols
        entries = {}
        for a, r in enumerate(rows):
            for b, c in enumerate(cols):
                if matrix[a, b] > TOL:
                    entries[(r, c)] = matrix[a, b]
        return cls(entries, dict(cloud or {}))

    def to_dense(self, n_rows: int, n_cols: int) -> np.ndarray:
        out = np.zeros((n_rows, n_cols))
        for (r, c), q in self.entries.items():
            out[r, c] = q
        return out

    def get(self, row: int, col: int) -> float:
        return self.entries.get((row, col), 0.0)

    def row_total(self, row: int) -> float:
        return sum(q for (r, _), q in self.entries.items() if r == row)

    def col_total(self, col: int) -> float:
        return sum(q for (_, c), q in self.entries.items() if c == col)

    def to_dict(self) -> dict[str, Any]:
        return {
            "entries": [[r, c, q] for (r, c), q in self.entries.items()],
            "cloud": [[r, q] for r, q in self.cloud.items()],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Allocation":
        return cls(
            {(int(r), int(c)): float(q) for r, c, q in doc.get("entries", [])},
            {int(r): float(q) for r, q in doc.get("cloud", [])},
        )


@dataclass(frozen=True)
class UtilityReport:
    dss: tuple[float, ...]
    dso: tuple[float, ...]
    fn: tuple[float, ...]
    cloud: tuple[float, ...]

    @property
    def dss_total(self) -> float:
        return math.fsum(self.dss)

    @property
    def dso_total(self) -> float:
        return math.fsum(self.dso)

    @property
    def fn_total(self) -> float:
        return math.fsum(self.fn)

    @property
    def cloud_total(self) -> float:
        return math.fsum(self.cloud)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dss": list(self.dss),
            "dso": list(self.dso),
            "fn": list(self.fn),
            "cloud": list(self.cloud),
            "totals": {
                "dss": self.dss_total,
                "dso": self.dso_total,
                "fn": self.fn_total,
                "cloud": self.cloud_total,
            },
        }


@dataclass(frozen=True)
class MarketOutcome:
    """Prices, purchases, both allocations and utilities of one market run.

    ``dso_fn`` rows are DSO ids, columns FN ids, ``cloud`` holds each DSO's
    cloud quantity. ``fn_dss`` rows are FN ids, columns DSS ids.
    """

    prices: tuple[float, ...]
    purchases: tuple[float, ...]
    participating: tuple[bool, ...]
    subscription: tuple[Optional[int], ...]
    dso_fn: Allocation
    fn_dss: Allocation
    utilities: UtilityReport

    def dss_cloud_share(self, j: int) -> float:
        if not self.participating[j]:
            return 0.0
        return max(0.0, self.purchases[j] - self.fn_dss.col_total(j))

    def to_dict(self) -> dict[str, Any]:
        return {
            "prices": list(self.prices),
            "purchases": list(self.purchases),
            "participating": list(self.participating),
            "subscription": list(self.subscription),
            "dso_fn": self.dso_fn.to_dict(),
            "fn_dss": self.fn_dss.to_dict(),
            "utilities": self.utilities.to_dict(),
        }
