"""Human-to-robot instruction vocabulary and level-gated state views.

Five instructions map onto fixed mutation classes:

  go to this place       -> attractive final source, selection only,
                            one active at a time (a new one supersedes)
  pass through this place-> attractive consumable source, gen+sel
  avoid this place       -> repulsive cumulative source, gen+sel
  I'm going to this place-> belief attenuation over the region, expiring
  I've already been here -> region marked perceived-explored for good

Communication levels gate what the human-facing view contains: L1 shows
exploration progress and the agent poses; L2 adds the robot's perceived
progress and its current plan; L3 adds instruction issuing and display.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .simengine import Claim, EpisodeConfig, EpisodeState
from .sources import (GaussianDecay, Kind, Nature, Policy, RewardSource,
                      ShapeSpec)
from .worldmap import Pose

GOTO = "GoTo"
PASS_THROUGH = "PassThrough"
AVOID = "Avoid"
IM_GOING_TO = "ImGoingTo"
BEEN_HERE = "BeenHere"
KINDS = (GOTO, PASS_THROUGH, AVOID, IM_GOING_TO, BEEN_HERE)

LEVELS = ("L1", "L2", "L3")


@dataclass(frozen=True)
class Instruction:
    kind: str
    center: tuple[float, float]
    radius: float
    issued_at: float = 0.0
    clear: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instruction kind: {self.kind!r}")
        if self.radius <= 0:
            raise ValueError("instruction region radius must be > 0")


@dataclass
class ApplyReport:
    applied: bool
    revision: int
    source_id: str | None = None
    note: str = ""


def _region_cells(grid, center, radius) -> np.ndarray:
    d2 = ((grid.centers[:, 0] - center[0]) ** 2
          + (grid.centers[:, 1] - center[1]) ** 2)
    return np.nonzero(d2 <= radius * radius)[0]


def apply(instruction: Instruction, state: EpisodeState,
          config: EpisodeConfig, now: float | None = None) -> ApplyReport:
    """Apply one instruction to the episode's registry and belief.  Every
    accepted instruction bumps the registry revision, which triggers a
    replan on the next tick."""
    now = state.clock if now is None else now
    grid = config.grid
    reg = state.registry
    cells = _region_cells(grid, instruction.center, instruction.radius)
    if cells.size == 0:
        return ApplyReport(False, reg.revision, note="region fully blocked")
    gains = config.comms
    kind = instruction.kind
    center = Pose(*instruction.center)
    record = {"kind": kind, "center": list(instruction.center),
              "radius": instruction.radius, "issued_at": now,
              "expires_at": None}

    if kind == GOTO:
        sid = "instr-goto"
        if instruction.clear:
            rep = reg.remove(sid)
            state.instructions = [d for d in state.instructions
                                  if d["kind"] != GOTO]
            return ApplyReport(rep.changed, reg.revision, sid, "cleared")
        # point footprint, sigma = region radius: the reward peak is flat
        # only at the region center, so bounded competing rewards (search
        # reward <= ln 2) can never push the selected endpoint outside the
        # region, which a uniform in-disk plateau would allow
        src = RewardSource(sid, Kind.ATTRACTIVE,
                           frozenset({Policy.SELECTION}), Nature.FINAL,
                           GaussianDecay(gains.goto_gain, instruction.radius),
                           ShapeSpec(center, 0.0))
        reg.replace(src)
        state.instructions = [d for d in state.instructions
                              if d["kind"] != GOTO] + [record]
        return ApplyReport(True, reg.revision, sid)

    if kind in (PASS_THROUGH, AVOID):
        n = sum(1 for d in state.instructions if d["kind"] == kind)
        sid = f"instr-{'pass' if kind == PASS_THROUGH else 'avoid'}-{n}"
        if kind == PASS_THROUGH:
            src = RewardSource(sid, Kind.ATTRACTIVE,
                               frozenset({Policy.GENERATION,
                                          Policy.SELECTION}),
                               Nature.CONSUMABLE,
                               GaussianDecay(gains.pass_gain,
                                             instruction.radius),
                               ShapeSpec(center, instruction.radius))
        else:
            src = RewardSource(sid, Kind.REPULSIVE,
                               frozenset({Policy.GENERATION,
                                          Policy.SELECTION}),
                               Nature.CUMULATIVE,
                               GaussianDecay(gains.avoid_gain,
                                             instruction.radius),
                               ShapeSpec(center, instruction.radius))
        reg.add(src)
        record["source_id"] = sid
        state.instructions.append(record)
        return ApplyReport(True, reg.revision, sid)

    if kind == IM_GOING_TO:
        expires = now + gains.claim_ttl
        state.claims.append(Claim(cells, gains.claim_factor, expires))
        record["expires_at"] = expires
        state.instructions.append(record)
        from .simengine import _refresh_belief
        _refresh_belief(state, now)
        reg.bump()
        return ApplyReport(True, reg.revision, None, "belief attenuated")

    # BEEN_HERE: permanent knowledge update
    state.robot_perceived[cells] = True
    state.instructions.append(record)
    from .simengine import _refresh_belief
    _refresh_belief(state, now)
    reg.bump()
    return ApplyReport(True, reg.revision, None, "marked explored")


# ---------------------------------------------------------------------------
# Level-gated views
# ---------------------------------------------------------------------------

def visible_state(level: str, state: EpisodeState,
                  config: EpisodeConfig) -> dict:
    """Exactly the fields licensed by the communication level."""
    if level not in LEVELS:
        raise ValueError(f"unknown comm level: {level!r}")
    view = {
        "clock": state.clock,
        "status": state.status,
        "robot": [state.robot.pose.x, state.robot.pose.y],
        "human": [state.human.pose.x, state.human.pose.y],
        "true_explored": np.nonzero(state.true_explored)[0].tolist(),
    }
    if level in ("L2", "L3"):
        view["robot_perceived"] = \
            np.nonzero(state.robot_perceived)[0].tolist()
        view["plan"] = ([[float(x), float(y)] for x, y in
                         state.plan.waypoints]
                        if state.plan is not None else [])
        view["plan_seq"] = state.plan_seq
    if level == "L3":
        view["instructions"] = [dict(d) for d in state.instructions]
    return view
