"""Reward sources: spatial generators of attraction and repulsion.

A source is defined by its type (attractive/repulsive), application policy
(path generation and/or path selection), nature (cumulative, consumable or
final), decay model, shape and dynamics.  Rewards mirror into costs by
negation.  Cumulative source values are reward densities per meter of
traversal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .worldmap import OccupancyGrid, Pose


class Kind(str, Enum):
    ATTRACTIVE = "attractive"
    REPULSIVE = "repulsive"


class Policy(str, Enum):
    GENERATION = "generation"
    SELECTION = "selection"


class Nature(str, Enum):
    CUMULATIVE = "cumulative"
    CONSUMABLE = "consumable"
    FINAL = "final"


@dataclass(frozen=True)
class GaussianDecay:
    """amplitude * exp(-d^2 / (2 sigma^2)) at footprint distance d."""
    amplitude: float
    sigma: float

    def __post_init__(self):
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite and >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")

    def decay(self, d: float) -> float:
        return math.exp(-(d * d) / (2.0 * self.sigma * self.sigma))


@dataclass(frozen=True)
class PowerDecay:
    """amplitude / (1 + (d / scale)^exponent)."""
    amplitude: float
    scale: float
    exponent: float = 2.0

    def __post_init__(self):
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite and >= 0")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        if self.exponent <= 0:
            raise ValueError("exponent must be > 0")

    def decay(self, d: float) -> float:
        return 1.0 / (1.0 + (d / self.scale) ** self.exponent)


@dataclass(frozen=True)
class GraphField:
    """Externally supplied per-cell value table keyed by free-cell id."""
    grid: OccupancyGrid
    values: np.ndarray  # (n_free,)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n_free,):
            raise ValueError("values must cover every free cell")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)


SourceModel = GaussianDecay | PowerDecay | GraphField


@dataclass(frozen=True)
class ShapeSpec:
    """Point footprint (radius 0) or disk.  Inside a disk the effective
    distance is clamped to 0, so the reward plateaus there."""
    center: Pose
    radius: float = 0.0

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


@dataclass(frozen=True)
class DynamicsSpec:
    velocity: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        vx, vy = self.velocity
        if not (math.isfinite(vx) and math.isfinite(vy)):
            raise ValueError("velocity components must be finite")


STATIC = DynamicsSpec()


@dataclass(frozen=True)
class RewardSource:
    id: str
    kind: Kind
    policies: frozenset
    nature: Nature
    model: SourceModel
    shape: ShapeSpec
    dynamics: DynamicsSpec = STATIC
    expiry: float | None = None
    updated_at: float = 0.0  # sim time the shape center refers to

    def __post_init__(self):
        pols = frozenset(Policy(p) for p in self.policies)
        if not pols:
            raise ValueError("source needs at least one application policy")
        object.__setattr__(self, "policies", pols)
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "nature", Nature(self.nature))

    def center_at(self, t: float) -> tuple[float, float]:
        vx, vy = self.dynamics.velocity
        dt = t - self.updated_at
        return (self.shape.center.x + vx * dt, self.shape.center.y + vy * dt)


def evaluate(source: RewardSource, p, t: float = 0.0) -> float:
    """Signed reward of one source at point p and sim time t."""
    if isinstance(p, Pose):
        px, py = p.x, p.y
    else:
        px, py = float(p[0]), float(p[1])
    sign = 1.0 if source.kind is Kind.ATTRACTIVE else -1.0
    model = source.model
    if isinstance(model, GraphField):
        cid = model.grid.free_id_at(px, py)
        if cid < 0:
            return 0.0
        return sign * float(model.values[cid])
    cx, cy = source.center_at(t)
    d = math.hypot(px - cx, py - cy) - source.shape.radius
    if d < 0.0:
        d = 0.0
    return sign * model.amplitude * model.decay(d)


def cost_of(reward: float) -> float:
    """Mirror a reward into a cost: negative rewards are perceived costs,
    positive ones negative costs."""
    return -reward


@dataclass(frozen=True)
class RegistrySnapshot:
    """Immutable view of a registry, ordered by source id."""
    sources: tuple
    revision: int
    time: float = 0.0

    def by(self, policy, nature) -> list:
        return [s for s in self.sources
                if Policy(policy) in s.policies and s.nature is Nature(nature)]


@dataclass
class MutationReport:
    revision: int
    moved: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    added: list = field(default_factory=list)
    replaced: list = field(default_factory=list)

    @property
    def changed(self) -> bool:
        return bool(self.moved or self.removed or self.added or self.replaced)


class SourceRegistry:
    """Id-keyed source collection with a monotonically increasing revision.

    Single writer; readers take snapshots.  The planner only ever sees a
    snapshot.
    """

    def __init__(self):
        self._sources: dict[str, RewardSource] = {}
        self.revision = 0

    def __len__(self):
        return len(self._sources)

    def __contains__(self, sid):
        return sid in self._sources

    def get(self, sid):
        return self._sources.get(sid)

    def add(self, source: RewardSource) -> MutationReport:
        if source.id in self._sources:
            raise ValueError(f"duplicate source id: {source.id}")
        self._sources[source.id] = source
        self.revision += 1
        return MutationReport(self.revision, added=[source.id])

    def replace(self, source: RewardSource) -> MutationReport:
        existed = source.id in self._sources
        self._sources[source.id] = source
        self.revision += 1
        rep = MutationReport(self.revision)
        (rep.replaced if existed else rep.added).append(source.id)
        return rep

    def remove(self, sid: str) -> MutationReport:
        rep = MutationReport(self.revision)
        if sid in self._sources:
            del self._sources[sid]
            self.revision += 1
            rep.revision = self.revision
            rep.removed.append(sid)
        return rep

    def bump(self) -> int:
        """Force a revision bump (e.g. field table refreshed in place)."""
        self.revision += 1
        return self.revision

    def snapshot(self, t: float = 0.0) -> RegistrySnapshot:
        ordered = tuple(self._sources[k] for k in sorted(self._sources))
        return RegistrySnapshot(ordered, self.revision, t)

    def step_dynamics(self, dt: float, now: float) -> MutationReport:
        """Advance moving sources by velocity*dt, drop expired ones.  The
        revision bumps iff anything changed."""
        if dt < 0:
            raise ValueError("dt must be >= 0")
        rep = MutationReport(self.revision)
        for sid in sorted(self._sources):
            src = self._sources[sid]
            if src.expiry is not None and now > src.expiry:
                del self._sources[sid]
                rep.removed.append(sid)
                continue
            vx, vy = src.dynamics.velocity
            if dt > 0.0 and (vx != 0.0 or vy != 0.0):
                c = src.shape.center
                moved = replace(
                    src,
                    shape=replace(src.shape,
                                  center=Pose(c.x + vx * dt, c.y + vy * dt,
                                              c.heading)),
                    updated_at=now)
                self._sources[sid] = moved
                rep.moved.append(sid)
        if rep.changed:
            self.revision += 1
        rep.revision = self.revision
        return rep


def sources_by(registry, policy, nature) -> list:
    """All sources matching both filters, ordered by id."""
    if isinstance(registry, RegistrySnapshot):
        return registry.by(policy, nature)
    pol, nat = Policy(policy), Nature(nature)
    return [registry._sources[k] for k in sorted(registry._sources)
            if pol in registry._sources[k].policies
            and registry._sources[k].nature is nat]


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

def _model_from_dict(d: dict) -> SourceModel:
    mtype = d.get("type")
    if mtype == "gaussian":
        return GaussianDecay(float(d["amplitude"]), float(d["sigma"]))
    if mtype == "power":
        return PowerDecay(float(d["amplitude"]), float(d["scale"]),
                          float(d.get("exponent", 2.0)))
    raise ValueError(f"unknown model type: {mtype!r}")


def source_from_dict(d: dict) -> RewardSource:
    shape = d.get("shape", {})
    center = shape.get("center", d.get("center"))
    if center is None:
        raise ValueError(f"source {d.get('id')!r} has no center")
    return RewardSource(
        id=str(d["id"]),
        kind=Kind(d["kind"]),
        policies=frozenset(d["policies"]),
        nature=Nature(d["nature"]),
        model=_model_from_dict(d["model"]),
        shape=ShapeSpec(Pose(float(center[0]), float(center[1])),
                        float(shape.get("radius", 0.0))),
        dynamics=DynamicsSpec(tuple(d.get("velocity", (0.0, 0.0)))),
        expiry=d.get("expiry"),
    )


def source_to_dict(src: RewardSource) -> dict:
    m = src.model
    if isinstance(m, GaussianDecay):
        model = {"type": "gaussian", "amplitude": m.amplitude,
                 "sigma": m.sigma}
    elif isinstance(m, PowerDecay):
        model = {"type": "power", "amplitude": m.amplitude,
                 "scale": m.scale, "exponent": m.exponent}
    else:
        raise ValueError("graph-field sources have no file form")
    return {"id": src.id, "kind": src.kind.value,
            "policies": sorted(p.value for p in src.policies),
            "nature": src.nature.value, "model": model,
            "shape": {"center": [src.shape.center.x, src.shape.center.y],
                      "radius": src.shape.radius},
            "velocity": list(src.dynamics.velocity), "expiry": src.expiry}


def load_sources(path) -> list[RewardSource]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise ValueError("source file must be a JSON list")
    return [source_from_dict(d) for d in data]
