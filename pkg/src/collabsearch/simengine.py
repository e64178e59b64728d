"""Episode state machine for the collaborative-search testbed.

Two agents with radial 360-degree sensing explore a known map for an
object placed uniformly at random over the free cells.  Ground-truth
exploration is the union of everything either agent has sensed; the robot
additionally keeps its own *perceived* exploration mask, grown by its own
sensing and by line-of-sight inference of the human's coverage.  The robot
plans over the current reward-source registry plus the search reward
derived from its belief; the human is driven externally (UI) or by a
scripted greedy policy.

Everything is deterministic given (config, seed, command trace): fixed
timestep, seeded draws, synchronous in-tick replanning, no wall clock.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import obsgraph
from .obsgraph import BeliefField, ObservabilityGraph, as_source, compute_scores
from .planner import Plan, PlannerConfig, plan as run_planner
from .sources import RegistrySnapshot, SourceRegistry, source_to_dict
from .worldmap import OccupancyGrid, Pose, load_map, visible_cells

FOUND_BY_ROBOT = "found_by_robot"
FOUND_BY_HUMAN = "found_by_human"
RUNNING = "running"
TIMEOUT = "timeout"
EXPLORED = "explored"  # explored-fraction termination rule met

ARRIVE_EPS = 1e-9


@dataclass
class AgentState:
    pose: Pose
    max_speed: float
    sense_radius: float
    velocity: tuple[float, float] = (0.0, 0.0)
    enabled: bool = True


@dataclass
class CommsParams:
    goto_gain: float = 10.0
    pass_gain: float = 2.0
    avoid_gain: float = 5.0      # cost density per meter inside the disk
    claim_factor: float = 0.1    # belief attenuation of "I'm going there"
    claim_ttl: float = 120.0


@dataclass
class EpisodeConfig:
    grid: OccupancyGrid
    origin: str = "A"
    origins: dict = field(default_factory=lambda: {
        "A": {"robot": (1.5, 1.5), "human": (2.5, 1.5)}})
    robot_sense_radius: float = 8.0
    human_sense_radius: float = 8.0
    robot_max_speed: float = 0.7
    human_max_speed: float = 1.0
    dt: float = 0.1
    replan_period: float = 2.0
    termination_rule: str = "find_object"   # or "explored_fraction"
    termination_fraction: float = 0.9
    timeout: float = 600.0
    comm_level: str = "L3"
    seed: int = 0
    planner: PlannerConfig = field(default_factory=lambda: PlannerConfig(
        max_nodes=600, conn_rate=0.01, time_budget_ms=None))
    w_obs: float = 0.8
    w_iso: float = 0.2
    comms: CommsParams = field(default_factory=CommsParams)
    robot_enabled: bool = True
    human_enabled: bool = True
    human_mode: str = "scripted"  # or "external"
    scenario_sources: tuple = ()  # preloaded into the episode registry

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.origin not in self.origins:
            raise ValueError(f"unknown origin label: {self.origin}")
        if self.termination_rule not in ("find_object", "explored_fraction"):
            raise ValueError(f"unknown termination rule: "
                             f"{self.termination_rule}")
        if self.comm_level not in ("L1", "L2", "L3"):
            raise ValueError(f"unknown comm level: {self.comm_level}")

    def to_dict(self) -> dict:
        p = self.planner
        return {
            "origin": self.origin,
            "origins": {k: {"robot": list(v["robot"]),
                            "human": list(v["human"])}
                        for k, v in sorted(self.origins.items())},
            "robot": {"sense_radius": self.robot_sense_radius,
                      "max_speed": self.robot_max_speed,
                      "enabled": self.robot_enabled},
            "human": {"sense_radius": self.human_sense_radius,
                      "max_speed": self.human_max_speed,
                      "enabled": self.human_enabled,
                      "mode": self.human_mode},
            "dt": self.dt,
            "replan_period": self.replan_period,
            "termination": {"rule": self.termination_rule,
                            "fraction": self.termination_fraction,
                            "timeout": self.timeout},
            "comm_level": self.comm_level,
            "seed": self.seed,
            "planner": {"max_nodes": p.max_nodes,
                        "step_size": p.step_size,
                        "neighbor_radius": p.neighbor_radius,
                        "lambda": p.conn_rate,
                        "time_budget_ms": p.time_budget_ms,
                        "seed": p.rng_seed},
            "reward": {"w_obs": self.w_obs, "w_iso": self.w_iso},
            "comms": {"goto_gain": self.comms.goto_gain,
                      "pass_gain": self.comms.pass_gain,
                      "avoid_gain": self.comms.avoid_gain,
                      "claim_factor": self.comms.claim_factor,
                      "claim_ttl": self.comms.claim_ttl},
            "sources": [source_to_dict(s) for s in self.scenario_sources],
        }


def config_from_dict(data: dict, base_dir=None,
                     grid: OccupancyGrid | None = None) -> EpisodeConfig:
    """Build a config from the JSON file structure (see README)."""
    if grid is None:
        map_path = Path(data["map"])
        if base_dir is not None and not map_path.is_absolute():
            map_path = Path(base_dir) / map_path
        grid = load_map(map_path)
    scenario = data.get("sources", ())
    if isinstance(scenario, str):
        from .sources import load_sources
        src_path = Path(scenario)
        if base_dir is not None and not src_path.is_absolute():
            src_path = Path(base_dir) / src_path
        scenario = tuple(load_sources(src_path))
    else:
        from .sources import source_from_dict
        scenario = tuple(source_from_dict(d) for d in scenario)
    robot = data.get("robot", {})
    human = data.get("human", {})
    term = data.get("termination", {})
    pl = data.get("planner", {})
    rew = data.get("reward", {})
    cm = data.get("comms", {})
    origins = {k: {"robot": tuple(v["robot"]), "human": tuple(v["human"])}
               for k, v in data.get("origins", {}).items()} or None
    kwargs = dict(
        grid=grid,
        origin=data.get("origin", "A"),
        robot_sense_radius=robot.get("sense_radius", 8.0),
        human_sense_radius=human.get("sense_radius", 8.0),
        robot_max_speed=robot.get("max_speed", 0.7),
        human_max_speed=human.get("max_speed", 1.0),
        robot_enabled=robot.get("enabled", True),
        human_enabled=human.get("enabled", True),
        human_mode=human.get("mode", "scripted"),
        dt=data.get("dt", 0.1),
        replan_period=data.get("replan_period", 2.0),
        termination_rule=term.get("rule", "find_object"),
        termination_fraction=term.get("fraction", 0.9),
        timeout=term.get("timeout", 600.0),
        comm_level=data.get("comm_level", "L3"),
        seed=data.get("seed", 0),
        planner=PlannerConfig(
            step_size=pl.get("step_size", 1.0),
            neighbor_radius=pl.get("neighbor_radius", 3.0),
            max_nodes=pl.get("max_nodes", 600),
            time_budget_ms=pl.get("time_budget_ms"),
            conn_rate=pl.get("lambda", 0.01),
            rng_seed=pl.get("seed", 0)),
        w_obs=rew.get("w_obs", 0.8),
        w_iso=rew.get("w_iso", 0.2),
        comms=CommsParams(
            goto_gain=cm.get("goto_gain", 10.0),
            pass_gain=cm.get("pass_gain", 2.0),
            avoid_gain=cm.get("avoid_gain", 5.0),
            claim_factor=cm.get("claim_factor", 0.1),
            claim_ttl=cm.get("claim_ttl", 120.0)),
        scenario_sources=scenario,
    )
    if origins:
        kwargs["origins"] = origins
    return EpisodeConfig(**kwargs)


def load_config(path) -> EpisodeConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        return config_from_dict(json.load(f), base_dir=path.parent)


@dataclass
class Claim:
    """Belief attenuation from an "I'm going to this place" message."""
    cells: np.ndarray
    factor: float
    expires_at: float


@dataclass
class EpisodeState:
    clock: float
    robot: AgentState
    human: AgentState
    true_explored: np.ndarray          # bool per free cell
    robot_perceived: np.ndarray        # bool per free cell
    belief: BeliefField
    object_cell: int
    registry: SourceRegistry
    graph: ObservabilityGraph          # robot sensing graph
    human_graph: ObservabilityGraph    # scripted-human sensing graph
    status: str = RUNNING
    plan: Plan | None = None
    plan_seq: int = 0
    plan_progress: int = 0             # next waypoint index
    last_plan_time: float = -math.inf
    last_plan_revision: int = -1
    claims: list = field(default_factory=list)
    instructions: list = field(default_factory=list)  # active, for the UI
    events: list = field(default_factory=list)
    human_policy: dict = field(default_factory=dict)
    plan_counter: int = 0
    _robot_vis: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64))
    _human_vis: np.ndarray = field(
        default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def explored_fraction(self) -> float:
        return float(self.true_explored.mean())


def _refresh_belief(state: EpisodeState, now: float):
    """Belief = uniform mass on robot-unperceived cells, attenuated by the
    live claims."""
    vals = np.where(state.robot_perceived, 0.0, 1.0)
    for c in state.claims:
        if c.expires_at > now:
            vals[c.cells] *= c.factor
    state.belief = BeliefField(vals, state.belief.revision + 1)


def init_episode(config: EpisodeConfig) -> EpisodeState:
    grid = config.grid
    start = config.origins[config.origin]
    rpose = Pose(*start["robot"])
    hpose = Pose(*start["human"])
    for name, p, enabled in (("robot", rpose, config.robot_enabled),
                             ("human", hpose, config.human_enabled)):
        if enabled and grid.blocked_at(p.x, p.y):
            raise ValueError(f"{name} start pose {p.xy} is in blocked space")
    rng = np.random.default_rng([config.seed, 101])
    object_cell = int(rng.integers(grid.n_free))

    state = EpisodeState(
        clock=0.0,
        robot=AgentState(rpose, config.robot_max_speed,
                         config.robot_sense_radius,
                         enabled=config.robot_enabled),
        human=AgentState(hpose, config.human_max_speed,
                         config.human_sense_radius,
                         enabled=config.human_enabled),
        true_explored=np.zeros(grid.n_free, dtype=bool),
        robot_perceived=np.zeros(grid.n_free, dtype=bool),
        belief=BeliefField(np.ones(grid.n_free)),
        object_cell=object_cell,
        registry=SourceRegistry(),
        graph=obsgraph.cached_graph(grid, config.robot_sense_radius),
        human_graph=obsgraph.cached_graph(grid, config.human_sense_radius),
    )
    for src in config.scenario_sources:
        state.registry.add(src)
    rn, hn = _sense(state, config)
    _infer_and_believe(state, config)
    _check_find(state, config)
    state.events.append({"e": "tick", "t": 0.0,
                         "r": [rpose.x, rpose.y], "h": [hpose.x, hpose.y],
                         "rn": rn, "hn": hn})
    return state


def _sense(state: EpisodeState, config: EpisodeConfig):
    """Both agents sense; returns (robot_new, human_new) cell id lists of
    cells newly added to true_explored, attributed per agent."""
    grid = config.grid
    rn: list = []
    hn: list = []
    rvis = hvis = None
    if state.robot.enabled:
        rvis = visible_cells(grid, state.robot.pose,
                             state.robot.sense_radius)
    if state.human.enabled:
        hvis = visible_cells(grid, state.human.pose,
                             state.human.sense_radius)
    if rvis is not None:
        new = rvis[~state.true_explored[rvis]]
        rn = new.tolist()
    if hvis is not None:
        new = hvis[~state.true_explored[hvis]]
        hn = new.tolist()
    if rvis is not None:
        state.true_explored[rvis] = True
        state.robot_perceived[rvis] = True
        state._robot_vis = rvis
    else:
        state._robot_vis = np.empty(0, dtype=np.int64)
    if hvis is not None:
        state.true_explored[hvis] = True
        state._human_vis = hvis
    else:
        state._human_vis = np.empty(0, dtype=np.int64)
    return sorted(rn), sorted(hn)


def infer_human(state: EpisodeState, config: EpisodeConfig) -> np.ndarray:
    """If the robot can see the human (line of sight, within its sensing
    radius), it infers the human's current coverage into its perceived
    mask.  Out of sight: no inference."""
    if not (state.robot.enabled and state.human.enabled):
        return np.empty(0, dtype=np.int64)
    grid = config.grid
    r, h = state.robot.pose, state.human.pose
    d = math.hypot(r.x - h.x, r.y - h.y)
    if d > state.robot.sense_radius:
        return np.empty(0, dtype=np.int64)
    from .worldmap import line_of_sight
    if not line_of_sight(grid, r, h):
        return np.empty(0, dtype=np.int64)
    hvis = state._human_vis if state._human_vis.size else visible_cells(
        grid, h, state.human.sense_radius)
    delta = hvis[~state.robot_perceived[hvis]]
    state.robot_perceived[hvis] = True
    return delta


def _infer_and_believe(state: EpisodeState, config: EpisodeConfig):
    infer_human(state, config)
    _refresh_belief(state, state.clock)


def _check_find(state: EpisodeState, config: EpisodeConfig):
    if state.status != RUNNING:
        return
    if config.termination_rule != "find_object":
        return
    obj = state.object_cell
    # ties (both see it the same tick) credit the robot, checked first
    if state.robot.enabled and obj in state._robot_vis:
        state.status = FOUND_BY_ROBOT
    elif state.human.enabled and obj in state._human_vis:
        state.status = FOUND_BY_HUMAN


def _slide_move(grid: OccupancyGrid, pose: Pose, vx: float, vy: float,
                dt: float) -> Pose:
    """Axis-separable slide: a blocked axis is dropped, the other kept."""
    nx = pose.x + vx * dt
    ny = pose.y + vy * dt
    if grid.blocked_at(nx, pose.y):
        nx = pose.x
    if grid.blocked_at(nx, ny):
        ny = pose.y
    return Pose(nx, ny, pose.heading)


def _clamp_speed(vx: float, vy: float, vmax: float):
    s = math.hypot(vx, vy)
    if s > vmax and s > 0.0:
        k = vmax / s
        return vx * k, vy * k
    return vx, vy


def _advance_robot(state: EpisodeState, config: EpisodeConfig):
    """Waypoint pursuit along the current plan, at most max_speed*dt of
    travel per tick."""
    p = state.plan
    if p is None or p.waypoints.shape[0] < 2:
        return
    budget = state.robot.max_speed * config.dt
    x, y = state.robot.pose.x, state.robot.pose.y
    i = state.plan_progress
    wps = p.waypoints
    while budget > ARRIVE_EPS and i < wps.shape[0]:
        tx, ty = wps[i]
        d = math.hypot(tx - x, ty - y)
        if d <= budget + ARRIVE_EPS:
            x, y = float(tx), float(ty)
            budget -= d
            i += 1
        else:
            x += (tx - x) / d * budget
            y += (ty - y) / d * budget
            budget = 0.0
    state.plan_progress = i
    state.robot.pose = Pose(x, y, state.robot.pose.heading)


def _plan_exhausted(state: EpisodeState) -> bool:
    return (state.plan is None
            or state.plan_progress >= state.plan.waypoints.shape[0])


def _search_snapshot(state: EpisodeState, config: EpisodeConfig) \
        -> RegistrySnapshot:
    """Registry snapshot extended with the search reward source built from
    the robot's current belief (recomputed at most once per planning)."""
    scores = compute_scores(state.graph, state.belief,
                            config.w_obs, config.w_iso)
    search = as_source(scores, state.graph)
    base = state.registry.snapshot(state.clock)
    merged = tuple(sorted(base.sources + (search,), key=lambda s: s.id))
    return RegistrySnapshot(merged, base.revision, state.clock)


def _maybe_replan(state: EpisodeState, config: EpisodeConfig):
    if not state.robot.enabled or state.status != RUNNING:
        return
    due = (state.clock - state.last_plan_time) >= config.replan_period
    if state.registry.revision != state.last_plan_revision:
        due = True
    if _plan_exhausted(state):
        due = True
    if not due:
        return
    snapshot = _search_snapshot(state, config)
    seed = int(np.random.SeedSequence(
        [config.seed, 202, state.plan_counter]).generate_state(1)[0])
    cfg = replace(config.planner, rng_seed=seed)
    state.plan = run_planner(snapshot, state.robot.pose, config.grid, cfg)
    state.plan.forest = None  # episodes keep logs, not search trees
    state.plan_counter += 1
    state.plan_seq += 1
    state.plan_progress = 1  # waypoint 0 is the robot pose itself
    state.last_plan_time = state.clock
    state.last_plan_revision = state.registry.revision
    state.events.append({"e": "plan", "t": state.clock,
                         "seq": state.plan_seq, **state.plan.to_record()})


def _expire_claims(state: EpisodeState, now: float) -> bool:
    live = [c for c in state.claims if c.expires_at > now]
    if len(live) != len(state.claims):
        state.claims = live
        state.instructions = [d for d in state.instructions
                              if d.get("expires_at") is None
                              or d["expires_at"] > now]
        state.registry.bump()
        return True
    return False


def tick(state: EpisodeState, config: EpisodeConfig,
         human_command=(0.0, 0.0)) -> EpisodeState:
    """Advance the episode one fixed timestep."""
    if state.status != RUNNING:
        return state
    grid = config.grid
    now = state.clock + config.dt

    if state.human.enabled:
        vx, vy = _clamp_speed(float(human_command[0]),
                              float(human_command[1]),
                              state.human.max_speed)
        state.human.velocity = (vx, vy)
        state.human.pose = _slide_move(grid, state.human.pose, vx, vy,
                                       config.dt)
    if state.robot.enabled:
        _advance_robot(state, config)

    rn, hn = _sense(state, config)
    infer_human(state, config)
    if _expire_claims(state, now):
        pass
    _refresh_belief(state, now)
    _check_find(state, config)

    state.clock = now
    state.events.append({"e": "tick", "t": round(now, 9),
                         "r": [state.robot.pose.x, state.robot.pose.y],
                         "h": [state.human.pose.x, state.human.pose.y],
                         "rn": rn, "hn": hn})

    if state.status == RUNNING:
        if (config.termination_rule == "explored_fraction"
                and state.explored_fraction >= config.termination_fraction):
            state.status = EXPLORED
        elif now >= config.timeout:
            state.status = TIMEOUT
    if state.status == RUNNING:
        _maybe_replan(state, config)
    else:
        state.events.append({"e": "end", "t": round(now, 9),
                             "status": state.status,
                             "fraction": state.explored_fraction,
                             "object_cell": state.object_cell})
    return state


# ---------------------------------------------------------------------------
# Scripted human: greedy pursuit of the search reward on ground truth
# ---------------------------------------------------------------------------

def _grid_path(grid: OccupancyGrid, start_cell: int, goal_cell: int):
    """Shortest 8-connected cell path (euclidean step weights, no corner
    cutting).  Returns a list of cell ids, start excluded."""
    if start_cell == goal_cell:
        return []
    idx = grid.free_index
    fx = grid.free_cells[:, 0]
    fy = grid.free_cells[:, 1]
    dist = np.full(grid.n_free, np.inf)
    prev = np.full(grid.n_free, -1, dtype=np.int64)
    dist[start_cell] = 0.0
    heap = [(0.0, start_cell)]
    moves = ((-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0),
             (-1, -1, math.sqrt(2)), (-1, 1, math.sqrt(2)),
             (1, -1, math.sqrt(2)), (1, 1, math.sqrt(2)))
    while heap:
        d0, u = heapq.heappop(heap)
        if u == goal_cell:
            break
        if d0 > dist[u]:
            continue
        ux, uy = fx[u], fy[u]
        for dx, dy, w in moves:
            vx, vy = ux + dx, uy + dy
            if not (0 <= vx < grid.width and 0 <= vy < grid.height):
                continue
            v = idx[vy, vx]
            if v < 0:
                continue
            if dx and dy and (idx[uy, vx] < 0 or idx[vy, ux] < 0):
                continue
            nd = d0 + w
            if nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if not math.isfinite(dist[goal_cell]):
        return None
    path = []
    c = goal_cell
    while c != start_cell:
        path.append(int(c))
        c = int(prev[c])
    path.reverse()
    return path


def scripted_human(state: EpisodeState, config: EpisodeConfig):
    """Greedy policy: head for the cell maximizing the search reward
    computed on the human's own knowledge (ground truth, since progress is
    shown to the human); re-target when the target's reward falls below
    half the current max."""
    if not state.human.enabled:
        return (0.0, 0.0)
    grid = config.grid
    pol = state.human_policy
    B = BeliefField(np.where(state.true_explored, 0.0, 1.0))
    sc = compute_scores(state.human_graph, B, config.w_obs, config.w_iso)
    rmax = sc.R.max()
    if rmax <= 0.0:
        return (0.0, 0.0)
    here = grid.free_id_at(state.human.pose.x, state.human.pose.y)
    target = pol.get("target", -1)
    need_new = (target < 0 or sc.R[target] < 0.5 * rmax
                or target == here or not pol.get("path"))
    if need_new:
        target = int(np.argmax(sc.R))
        if target == here:
            return (0.0, 0.0)
        path = _grid_path(grid, here, target) if here >= 0 else None
        if not path:
            pol.pop("target", None)
            pol["path"] = []
            return (0.0, 0.0)
        pol["target"] = target
        pol["path"] = path
    path = pol["path"]
    # steer toward the next path cell center, dropping reached cells
    while path:
        cx, cy = grid.cell_center(path[0])
        d = math.hypot(cx - state.human.pose.x, cy - state.human.pose.y)
        if d < 0.25:
            path.pop(0)
            continue
        return _clamp_speed((cx - state.human.pose.x) / max(d, 1e-9)
                            * state.human.max_speed,
                            (cy - state.human.pose.y) / max(d, 1e-9)
                            * state.human.max_speed,
                            state.human.max_speed)
    pol.pop("target", None)
    return (0.0, 0.0)


# ---------------------------------------------------------------------------
# Whole-episode driver
# ---------------------------------------------------------------------------

def run_episode(config: EpisodeConfig, human_source="scripted",
                max_ticks: int | None = None) -> EpisodeState:
    """Tick until termination.  human_source: "scripted", None (idle), or
    a callable(state, config) -> (vx, vy)."""
    state = init_episode(config)
    _maybe_replan(state, config)
    limit = max_ticks if max_ticks is not None else \
        int(math.ceil(config.timeout / config.dt)) + 1
    for _ in range(limit):
        if state.status != RUNNING:
            break
        if human_source == "scripted":
            cmd = scripted_human(state, config)
        elif callable(human_source):
            cmd = human_source(state, config)
        else:
            cmd = (0.0, 0.0)
        tick(state, config, cmd)
    if state.status == RUNNING:
        state.status = TIMEOUT
        state.events.append({"e": "end", "t": round(state.clock, 9),
                             "status": state.status,
                             "fraction": state.explored_fraction,
                             "object_cell": state.object_cell})
    return state
