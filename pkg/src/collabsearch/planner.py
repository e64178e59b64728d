"""Sourced RRT*: multi-tree RRT* whose edge and node costs come from the
reward-source registry.

Generation-policy sources steer tree growth; selection-policy sources rank
the grown nodes afterwards.  Cost bookkeeping per path P_n ending at n:

  cumulative  sum over edges of (sum_j s_j(i) * d + lambda * d), s mirrored
              to cost space and sampled at the edge's destination node
  consumable  one contribution per source: the extremum of |s| along the
              path, applied with the source's sign (collected once)
  final       sum_j s_j(n) at the end node only

Trees take root at the robot pose and at the footprint centers of
attractive consumable/final sources; trees that accept the same sampled
position merge, keeping the lower tree id's root.  Planning is a pure
function of (registry snapshot, pose, config, seed).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _expand, kernels
from .sources import (GaussianDecay, GraphField, Kind, Nature, Policy,
                      PowerDecay, RegistrySnapshot, RewardSource)
from .worldmap import OccupancyGrid, Pose, _as_xy

EXPAND_CHUNK = 512
MAX_SAMPLE_FACTOR = 64  # stagnation guard: samples per requested node


class PlannerError(RuntimeError):
    pass


@dataclass
class PlannerConfig:
    step_size: float = 1.0
    neighbor_radius: float = 3.0
    max_nodes: int = 3000
    time_budget_ms: float | None = None  # None: node count governs
    conn_rate: float = 1.0               # lambda, cost per meter
    rng_seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")
        if self.neighbor_radius <= 0:
            raise ValueError("neighbor_radius must be > 0")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.conn_rate < 0:
            raise ValueError("conn_rate must be >= 0")


@dataclass
class PlanNode:
    """Read-only view of one forest node."""
    index: int
    position: tuple[float, float]
    parent: int
    tree_id: int
    cum_cost: float
    running_max: np.ndarray


@dataclass
class Plan:
    waypoints: np.ndarray            # (k, 2) root-to-node, robot tree
    cost: float                      # C_sel total
    components: dict                 # {"cm", "cs", "f"}
    edge_lengths: np.ndarray         # (k-1,)
    edge_costs: np.ndarray           # (k-1,) cumulative-term contribution
    node_index: int
    node_count: int
    forest: object = None            # kept for audits; not serialized

    @property
    def length(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def poses(self) -> list[Pose]:
        return [Pose(float(x), float(y)) for x, y in self.waypoints]

    def to_record(self) -> dict:
        return {
            "waypoints": [[float(x), float(y)] for x, y in self.waypoints],
            "cost": float(self.cost),
            "components": {k: float(v) for k, v in self.components.items()},
            "edges": [{"d": float(d), "cm": float(c)}
                      for d, c in zip(self.edge_lengths, self.edge_costs)],
            "nodes": int(self.node_count),
        }


# ---------------------------------------------------------------------------
# Source packing: registry snapshot -> flat parameter arrays for the kernels
# ---------------------------------------------------------------------------

def _cost_sign(src: RewardSource) -> float:
    # mirrored cost of an attractive reward is negative
    return -1.0 if src.kind is Kind.ATTRACTIVE else 1.0


def _pack(sources, snap_time: float, grid: OccupancyGrid, gf_tables: list):
    rows = []
    signs = []
    for src in sources:
        sgn = _cost_sign(src)
        m = src.model
        if isinstance(m, GraphField):
            table = np.zeros(grid.height * grid.width, dtype=np.float64)
            fy = grid.free_cells[:, 1]
            fx = grid.free_cells[:, 0]
            table[fy * grid.width + fx] = sgn * m.values
            gfi = len(gf_tables)
            gf_tables.append(table)
            rows.append([kernels.FIELD, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0,
                         sgn, gfi])
        else:
            cx, cy = src.center_at(snap_time)
            code = kernels.GAUSS if isinstance(m, GaussianDecay) else kernels.POWER
            slen = m.sigma if isinstance(m, GaussianDecay) else m.scale
            kexp = 2.0 if isinstance(m, GaussianDecay) else m.exponent
            rows.append([code, m.amplitude, slen, kexp, cx, cy,
                         src.shape.radius, sgn, -1])
        signs.append(sgn)
    return kernels.pack_sources(rows), np.array(signs, dtype=np.float64)


class _PackedPolicy:
    """Cumulative/consumable/final parameter arrays for one policy."""

    def __init__(self, snapshot: RegistrySnapshot, policy: Policy,
                 grid: OccupancyGrid):
        gf: list = []
        self.cm_sources = snapshot.by(policy, Nature.CUMULATIVE)
        self.cs_sources = snapshot.by(policy, Nature.CONSUMABLE)
        self.f_sources = snapshot.by(policy, Nature.FINAL)
        self.cmP, _ = _pack(self.cm_sources, snapshot.time, grid, gf)
        self.csP, self.cs_signs = _pack(self.cs_sources, snapshot.time, grid, gf)
        self.fP, _ = _pack(self.f_sources, snapshot.time, grid, gf)
        if gf:
            self.gf_tables = np.stack(gf)
        else:
            self.gf_tables = np.zeros((1, 1), dtype=np.float64)

    def cost_rows(self, P: np.ndarray, xs: np.ndarray,
                  ys: np.ndarray) -> np.ndarray:
        """Mirrored cost of each packed source at each point: (nsrc, npts).
        Vectorised; used by selection and audits, not by tree growth."""
        out = np.zeros((P.shape[0], xs.shape[0]))
        for j in range(P.shape[0]):
            code = int(P[j, 0])
            if code == kernels.FIELD:
                out[j] = self._field_row(P[j], xs, ys)
                continue
            d = np.hypot(xs - P[j, 4], ys - P[j, 5]) - P[j, 6]
            np.maximum(d, 0.0, out=d)
            if code == kernels.GAUSS:
                g = np.exp(-(d * d) / (2.0 * P[j, 2] * P[j, 2]))
            else:
                g = 1.0 / (1.0 + (d / P[j, 2]) ** P[j, 3])
            out[j] = P[j, 7] * P[j, 1] * g
        return out

    def _field_row(self, row, xs, ys):
        table = self.gf_tables[int(row[8])]
        return _field_lookup(self._grid, table, xs, ys)

    def bind_grid(self, grid):
        self._grid = grid
        return self


def _field_lookup(grid: OccupancyGrid, table: np.ndarray,
                  xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    u = np.floor((xs - grid.origin[0]) / grid.resolution).astype(np.int64)
    v = np.floor((ys - grid.origin[1]) / grid.resolution).astype(np.int64)
    ok = (u >= 0) & (u < grid.width) & (v >= 0) & (v < grid.height)
    out = np.zeros(xs.shape[0])
    out[ok] = table[v[ok] * grid.width + u[ok]]
    return out


# ---------------------------------------------------------------------------
# Path costs (recomputable contract, shared by select and audits)
# ---------------------------------------------------------------------------

@dataclass
class PathCost:
    cumulative: float
    consumable: float
    final: float

    @property
    def total(self) -> float:
        return self.cumulative + self.consumable + self.final


def path_cost(points: np.ndarray, snapshot: RegistrySnapshot,
              conn_rate: float, policy, grid: OccupancyGrid,
              include_final: bool = True) -> PathCost:
    """Cost of a concrete waypoint path under one application policy,
    computed from scratch.  points is (k, 2), root first."""
    pts = np.asarray(points, dtype=np.float64)
    packed = _PackedPolicy(snapshot, Policy(policy), grid).bind_grid(grid)
    xs, ys = pts[:, 0], pts[:, 1]
    d = np.hypot(np.diff(xs), np.diff(ys))
    cm_rows = packed.cost_rows(packed.cmP, xs, ys)
    cm = float(((cm_rows[:, 1:].sum(axis=0) + conn_rate) * d).sum()) \
        if pts.shape[0] > 1 else 0.0
    cs = 0.0
    if packed.csP.shape[0]:
        cs_rows = packed.cost_rows(packed.csP, xs, ys)
        cs = float((packed.cs_signs * np.abs(cs_rows).max(axis=1)).sum())
    f = 0.0
    if include_final and packed.fP.shape[0]:
        f_rows = packed.cost_rows(packed.fP, xs[-1:], ys[-1:])
        f = float(f_rows.sum())
    return PathCost(cm, cs, f)


def gen_cost(points: np.ndarray, snapshot: RegistrySnapshot,
             conn_rate: float, grid: OccupancyGrid) -> PathCost:
    """C_gen of a path: cumulative + consumable terms under the generation
    policy (no final term in generation)."""
    return path_cost(points, snapshot, conn_rate, Policy.GENERATION, grid,
                     include_final=False)


# ---------------------------------------------------------------------------
# Tree origins
# ---------------------------------------------------------------------------

def get_tree_origins(snapshot: RegistrySnapshot, robot_pose,
                     grid: OccupancyGrid,
                     step_size: float) -> list[tuple[float, float]]:
    """Robot pose first, then one origin per attractive consumable or final
    source whose footprint center lies in free space.  Origins closer than
    step_size to an earlier one are dropped.

    Only sources carrying the generation policy seed trees: selection-only
    sources must not alter growth at all (policy separation), and rooting
    is a growth effect.
    """
    rx, ry = _as_xy(robot_pose)
    origins = [(rx, ry)]
    for src in snapshot.sources:
        if src.kind is not Kind.ATTRACTIVE:
            continue
        if src.nature not in (Nature.CONSUMABLE, Nature.FINAL):
            continue
        if Policy.GENERATION not in src.policies:
            continue
        cx, cy = src.center_at(snapshot.time)
        if grid.blocked_at(cx, cy):
            continue
        if any(math.hypot(cx - x, cy - y) < step_size for x, y in origins):
            continue
        origins.append((cx, cy))
    return origins


# ---------------------------------------------------------------------------
# Forest
# ---------------------------------------------------------------------------

class Forest:
    """Multi-tree search state over flat arrays (see _expand for layout)."""

    def __init__(self, grid: OccupancyGrid, snapshot: RegistrySnapshot,
                 origins, config: PlannerConfig):
        self.grid = grid
        self.snapshot = snapshot
        self.config = config
        self.gen = _PackedPolicy(snapshot, Policy.GENERATION, grid).bind_grid(grid)
        ntrees = len(origins)
        cap = config.max_nodes + ntrees + 2
        ncs = self.gen.csP.shape[0]
        self.A = {
            "pos": np.zeros((cap, 2)),
            "parent": np.full(cap, -1, dtype=np.int64),
            "tree": np.full(cap, -1, dtype=np.int64),
            "cm": np.zeros(cap),
            "gtot": np.zeros(cap),
            "rmax": np.zeros((cap, ncs)),
            "loc_cm": np.zeros(cap),
            "loc_abs": np.zeros((cap, ncs)),
            "fc": np.full(cap, -1, dtype=np.int64),
            "ns": np.full(cap, -1, dtype=np.int64),
            "ps": np.full(cap, -1, dtype=np.int64),
            "bnext": np.full(cap, -1, dtype=np.int64),
            "alive": np.ones(ntrees, dtype=np.uint8),
            "state": np.zeros(4, dtype=np.int64),
            "nbuf": np.zeros(cap, dtype=np.int64),
            "ncost": np.zeros(cap),
            "stk": np.zeros(cap, dtype=np.int64),
            "chain": np.zeros(cap, dtype=np.int64),
            "vabs": np.zeros(max(ncs, 1)),
        }
        ox, oy = grid.origin
        side = config.neighbor_radius
        self.bparams = (
            ox, oy, side,
            max(1, math.ceil(grid.width * grid.resolution / side)),
            max(1, math.ceil(grid.height * grid.resolution / side)),
        )
        nb = self.bparams[3] * self.bparams[4]
        self.A["bhead"] = np.full(nb, -1, dtype=np.int64)
        # corner coordinates of free cells, for sampling
        self.fcx = (grid.free_cells[:, 0] * grid.resolution + ox).astype(float)
        self.fcy = (grid.free_cells[:, 1] * grid.resolution + oy).astype(float)

        for tid, (x, y) in enumerate(origins):
            i = tid
            self.A["pos"][i] = (x, y)
            self.A["tree"][i] = tid
            vcm = kernels._cm_cost_at_py(
                x, y, self.gen.cmP, self.gen.gf_tables, ox, oy,
                grid.resolution, grid.width, grid.height)
            self.A["loc_cm"][i] = vcm
            t = 0.0
            for j in range(ncs):
                P = self.gen.csP
                a = abs(kernels._cost_one_py(
                    int(P[j, 0]), P[j, 1], P[j, 2], P[j, 3], P[j, 4],
                    P[j, 5], P[j, 6], P[j, 7], int(P[j, 8]),
                    self.gen.gf_tables, x, y, ox, oy, grid.resolution,
                    grid.width, grid.height))
                self.A["loc_abs"][i, j] = a
                self.A["rmax"][i, j] = a
                t += self.gen.cs_signs[j] * a
            self.A["gtot"][i] = t
            bminx, bminy, bside, nbx, nby = self.bparams
            bi = min(max(int((x - bminx) / bside), 0), nbx - 1)
            bj = min(max(int((y - bminy) / bside), 0), nby - 1)
            b = bj * nbx + bi
            self.A["bnext"][i] = self.A["bhead"][b]
            self.A["bhead"][b] = i
        self.A["state"][0] = ntrees
        self.n_origins = ntrees

    @property
    def n(self) -> int:
        return int(self.A["state"][0])

    @property
    def positions(self) -> np.ndarray:
        return self.A["pos"][: self.n]

    @property
    def parents(self) -> np.ndarray:
        return self.A["parent"][: self.n]

    @property
    def tree_ids(self) -> np.ndarray:
        return self.A["tree"][: self.n]

    @property
    def gen_costs(self) -> np.ndarray:
        return self.A["gtot"][: self.n]

    def node(self, i: int) -> PlanNode:
        return PlanNode(i, tuple(self.A["pos"][i]), int(self.A["parent"][i]),
                        int(self.A["tree"][i]), float(self.A["cm"][i]),
                        self.A["rmax"][i].copy())

    def path_indices(self, i: int) -> list[int]:
        out = [i]
        while self.A["parent"][out[-1]] != -1:
            out.append(int(self.A["parent"][out[-1]]))
        out.reverse()
        return out

    def path_points(self, i: int) -> np.ndarray:
        return self.A["pos"][self.path_indices(i)]

    def expand_chunk(self, samples: np.ndarray) -> int:
        """Run one chunk of samples; returns nodes added."""
        g = self.grid
        before = self.n
        _expand.expand_batch(
            samples, self.A, g.occupancy, np.uint8(g.has_obstacles),
            g.origin[0], g.origin[1], g.resolution, g.width, g.height,
            self.fcx, self.fcy, self.gen.cmP, self.gen.csP,
            self.gen.cs_signs, self.gen.gf_tables,
            self.config.step_size, self.config.neighbor_radius,
            self.config.conn_rate, self.config.max_nodes, self.bparams)
        return self.n - before

    def audit_consistency(self, atol: float = 1e-9) -> float:
        """Recompute every node's generation cost from scratch along parent
        links (fresh source evaluations) and return the worst deviation."""
        n = self.n
        xs, ys = self.A["pos"][:n, 0], self.A["pos"][:n, 1]
        cm_rows = self.gen.cost_rows(self.gen.cmP, xs, ys)
        loc = cm_rows.sum(axis=0) if cm_rows.shape[0] else np.zeros(n)
        cs_rows = (np.abs(self.gen.cost_rows(self.gen.csP, xs, ys))
                   if self.gen.csP.shape[0] else np.zeros((0, n)))
        cm_re = np.zeros(n)
        rm_re = np.zeros((n, cs_rows.shape[0]))
        order = self._bfs_order()
        lam = self.config.conn_rate
        for i in order:
            p = int(self.A["parent"][i])
            if p == -1:
                rm_re[i] = cs_rows[:, i] if cs_rows.size else 0.0
                continue
            d = math.hypot(xs[i] - xs[p], ys[i] - ys[p])
            cm_re[i] = cm_re[p] + (lam + loc[i]) * d
            if cs_rows.size:
                rm_re[i] = np.maximum(rm_re[p], cs_rows[:, i])
        worst = float(np.abs(cm_re - self.A["cm"][:n]).max()) if n else 0.0
        if cs_rows.size:
            worst = max(worst,
                        float(np.abs(rm_re - self.A["rmax"][:n]).max()))
        return worst

    def _bfs_order(self) -> list[int]:
        n = self.n
        order = []
        stack = [i for i in range(self.n_origins) if self.A["parent"][i] == -1]
        seen = 0
        while stack:
            u = stack.pop()
            order.append(u)
            seen += 1
            c = int(self.A["fc"][u])
            while c != -1:
                stack.append(c)
                c = int(self.A["ns"][c])
        if seen != n:
            raise PlannerError("forest contains unreachable nodes")
        return order


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

def select(forest: Forest, snapshot: RegistrySnapshot | None = None) -> Plan:
    """Rank every node of the robot-rooted tree by its selection cost and
    return the cheapest node's path.  Ties break on shorter path length,
    then lower node id."""
    if forest.n == 0:
        raise PlannerError("empty forest")
    snapshot = snapshot or forest.snapshot
    grid = forest.grid
    sel = _PackedPolicy(snapshot, Policy.SELECTION, grid).bind_grid(grid)
    n = forest.n
    A = forest.A
    xs, ys = A["pos"][:n, 0], A["pos"][:n, 1]
    lam = forest.config.conn_rate

    cm_rows = sel.cost_rows(sel.cmP, xs, ys)
    loc_cm = cm_rows.sum(axis=0) if cm_rows.shape[0] else np.zeros(n)
    cs_rows = (np.abs(sel.cost_rows(sel.csP, xs, ys))
               if sel.csP.shape[0] else None)
    f_rows = sel.cost_rows(sel.fP, xs, ys)
    fin = f_rows.sum(axis=0) if f_rows.shape[0] else np.zeros(n)

    robot_tree = A["tree"][:n] == 0
    cm_sel = np.zeros(n)
    plen = np.zeros(n)
    edge_cm = np.zeros(n)
    rms = np.zeros((n, cs_rows.shape[0])) if cs_rows is not None else None
    for i in forest._bfs_order():
        p = int(A["parent"][i])
        if p == -1:
            if rms is not None:
                rms[i] = cs_rows[:, i]
            continue
        d = math.hypot(xs[i] - xs[p], ys[i] - ys[p])
        edge_cm[i] = (lam + loc_cm[i]) * d
        cm_sel[i] = cm_sel[p] + edge_cm[i]
        plen[i] = plen[p] + d
        if rms is not None:
            rms[i] = np.maximum(rms[p], cs_rows[:, i])
    cs_sel = (rms @ sel.cs_signs) if rms is not None else np.zeros(n)
    total = cm_sel + cs_sel + fin
    total = np.where(robot_tree, total, np.inf)
    if not robot_tree.any():
        raise PlannerError("empty forest")
    ids = np.arange(n)
    best = int(np.lexsort((ids, plen, total))[0])

    idx = forest.path_indices(best)
    pts = A["pos"][idx]
    dl = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    return Plan(
        waypoints=pts.copy(),
        cost=float(total[best]),
        components={"cm": float(cm_sel[best]), "cs": float(cs_sel[best]),
                    "f": float(fin[best])},
        edge_lengths=dl,
        edge_costs=edge_cm[idx[1:]],
        node_index=best,
        node_count=n,
    )


# ---------------------------------------------------------------------------
# Full planning cycle
# ---------------------------------------------------------------------------

def plan(snapshot: RegistrySnapshot, robot_pose, grid: OccupancyGrid,
         config: PlannerConfig | None = None) -> Plan:
    """Root trees, expand until the node budget or time budget is hit
    (whichever first), then run path selection."""
    config = config or PlannerConfig()
    rx, ry = _as_xy(robot_pose)
    if grid.blocked_at(rx, ry):
        raise PlannerError(f"robot pose ({rx}, {ry}) is in blocked space")
    origins = get_tree_origins(snapshot, (rx, ry), grid, config.step_size)
    forest = Forest(grid, snapshot, origins, config)
    rng = np.random.default_rng(config.rng_seed)
    t0 = time.perf_counter()
    budget = (None if config.time_budget_ms is None
              else config.time_budget_ms / 1000.0)
    max_samples = MAX_SAMPLE_FACTOR * config.max_nodes
    while forest.n < config.max_nodes:
        if budget is not None and time.perf_counter() - t0 >= budget:
            break
        if int(forest.A["state"][1]) >= max_samples:
            break
        samples = rng.random((EXPAND_CHUNK, 3))
        forest.expand_chunk(samples)
    p = select(forest)
    p.forest = forest  # exposed for audits and policy-separation checks
    return p
