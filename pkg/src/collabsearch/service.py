"""Live session service: browser clients drive the human avatar and issue
instructions over a persistent WebSocket, receiving level-gated state at
the simulation tick rate.

One session owns one episode.  All mutable state is owned by the session's
tick loop; network handlers only enqueue messages.  Commands sample-and-
hold between ticks; instructions apply atomically between ticks.  Every
client message is acknowledged (ack or error) and every applied command or
instruction is recorded in the episode log, which makes a recorded session
replayable headlessly, byte for byte.
"""

from __future__ import annotations

import asyncio
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import comms, metrics
from .comms import Instruction, apply as apply_instruction, visible_state
from .simengine import (RUNNING, EpisodeConfig, EpisodeState, init_episode,
                        _maybe_replan, tick)
from .worldmap import dump_map

LOG_DIR_ENV = "COLLABSEARCH_LOG_DIR"
DISCONNECT_GRACE_S = 2.0


def _emit_cmd(state: EpisodeState, t: float, v) -> None:
    state.events.append({"e": "cmd", "t": round(t, 9),
                         "v": [float(v[0]), float(v[1])]})


def _emit_instr(state: EpisodeState, t: float, ins: Instruction,
                applied: bool, revision: int) -> None:
    state.events.append({"e": "instr", "t": round(t, 9), "kind": ins.kind,
                         "center": [float(ins.center[0]),
                                    float(ins.center[1])],
                         "radius": float(ins.radius),
                         "clear": bool(ins.clear),
                         "applied": bool(applied), "revision": revision})


def step_session(state: EpisodeState, config: EpisodeConfig,
                 held_cmd, new_cmd, instructions) -> tuple:
    """One deterministic session step: record and apply pending inputs,
    then advance the episode one tick.  Returns the held command."""
    now = state.clock  # inputs take effect at the tick starting now
    if new_cmd is not None and tuple(new_cmd) != tuple(held_cmd):
        held_cmd = (float(new_cmd[0]), float(new_cmd[1]))
        _emit_cmd(state, now, held_cmd)
    elif new_cmd is not None:
        held_cmd = (float(new_cmd[0]), float(new_cmd[1]))
    for ins in instructions:
        rep = apply_instruction(ins, state, config, now=now)
        _emit_instr(state, now, ins, rep.applied, rep.revision)
    tick(state, config, held_cmd)
    return held_cmd


def replay_events(config: EpisodeConfig, events) -> EpisodeState:
    """Re-run a recorded session headlessly from its event stream.  The
    resulting state carries an identical event list."""
    state = init_episode(config)
    _maybe_replan(state, config)
    by_time: dict = {}
    for ev in events:
        if ev["e"] in ("cmd", "instr"):
            by_time.setdefault(round(float(ev["t"]), 9), []).append(ev)
    held = (0.0, 0.0)
    while state.status == RUNNING:
        now = round(state.clock, 9)
        new_cmd = None
        instructions = []
        for ev in by_time.get(now, ()):
            if ev["e"] == "cmd":
                new_cmd = tuple(ev["v"])
            else:
                instructions.append(Instruction(
                    ev["kind"], tuple(ev["center"]), ev["radius"],
                    issued_at=now, clear=ev.get("clear", False)))
        held = step_session(state, config, held, new_cmd, instructions)
    return state


@dataclass
class Session:
    sid: str
    config: EpisodeConfig
    level: str
    state: EpisodeState = None
    held_cmd: tuple = (0.0, 0.0)
    pending_cmd: tuple | None = None
    pending_instr: list = field(default_factory=list)
    clients: list = field(default_factory=list)
    seq: int = 0
    sent_explored: int = 0
    sent_perceived: int = 0
    task: asyncio.Task | None = None
    log_written: bool = False

    def start(self):
        self.state = init_episode(self.config)
        _maybe_replan(self.state, self.config)

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def state_payload(self) -> dict:
        """Level-gated state message; masks go out as deltas after the
        keyframe a client receives on join."""
        view = visible_state(self.level, self.state, self.config)
        msg = {"type": "state", "seq": self.next_seq(),
               "t": view["clock"], "status": view["status"],
               "robot": view["robot"], "human": view["human"]}
        explored = view["true_explored"]
        msg["explored_added"] = explored[self.sent_explored:]
        self.sent_explored = len(explored)
        if "robot_perceived" in view:
            perceived = view["robot_perceived"]
            msg["perceived_added"] = perceived[self.sent_perceived:]
            self.sent_perceived = len(perceived)
            msg["plan"] = view["plan"]
            msg["plan_seq"] = view["plan_seq"]
        if "instructions" in view:
            msg["instructions"] = view["instructions"]
        return msg

    def keyframe(self) -> dict:
        view = visible_state(self.level, self.state, self.config)
        msg = {"type": "hello", "seq": self.next_seq(), "session": self.sid,
               "level": self.level,
               "map": dump_map(self.config.grid),
               "n_free": self.config.grid.n_free,
               "dt": self.config.dt,
               "max_speed": self.config.human_max_speed,
               "keyframe": view}
        return msg


def _resolve_log_dir(explicit=None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get(LOG_DIR_ENV, "logs"))


def create_app(config: EpisodeConfig, wall_dt: float | None = None,
               log_dir=None) -> FastAPI:
    """Session service.  wall_dt is the wall-clock tick pacing (defaults
    to the sim dt: real time); the simulation step is always config.dt."""
    app = FastAPI()
    sessions: dict[str, Session] = {}
    pace = config.dt if wall_dt is None else wall_dt
    out_dir = _resolve_log_dir(log_dir)

    async def broadcast(session: Session, msg: dict):
        dead = []
        text = json.dumps(msg, sort_keys=True)
        for ws in session.clients:
            try:
                await ws.send_text(text)
            except Exception:
                dead.append(ws)
        for ws in dead:
            if ws in session.clients:
                session.clients.remove(ws)

    def write_log(session: Session):
        if session.log_written:
            return
        session.log_written = True
        eplog = metrics.log_from_state(session.state, session.config,
                                       setup=f"serve-{session.level}")
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics.write_eplog(out_dir / f"{session.sid}{metrics.LOG_SUFFIX}",
                            eplog.header, eplog.events)

    async def run_session(session: Session):
        grace = 0.0
        while True:
            await asyncio.sleep(pace)
            if not session.clients:
                grace += pace
                if grace >= DISCONNECT_GRACE_S:
                    continue  # paused until someone reconnects
            else:
                grace = 0.0
            if session.state.status != RUNNING:
                continue
            new_cmd = session.pending_cmd
            session.pending_cmd = None
            instrs = session.pending_instr
            session.pending_instr = []
            session.held_cmd = step_session(session.state, session.config,
                                            session.held_cmd, new_cmd,
                                            instrs)
            await broadcast(session, session.state_payload())
            if session.state.status != RUNNING:
                write_log(session)
                await broadcast(session, {
                    "type": "end", "seq": session.next_seq(),
                    "status": session.state.status,
                    "t": session.state.clock})

    def get_session(sid: str, level: str) -> Session:
        if sid not in sessions:
            cfg = replace(config, comm_level=level)
            s = Session(sid, cfg, level)
            s.start()
            s.task = asyncio.get_event_loop().create_task(run_session(s))
            sessions[sid] = s
        return sessions[sid]

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        sid = ws.query_params.get("session", "default")
        level = ws.query_params.get("level", config.comm_level)
        if level not in comms.LEVELS:
            await ws.send_text(json.dumps(
                {"type": "error", "seq": 0,
                 "message": f"unknown level {level}"}, sort_keys=True))
            await ws.close()
            return
        session = get_session(sid, level)
        session.clients.append(ws)
        await ws.send_text(json.dumps(session.keyframe(), sort_keys=True))
        try:
            while True:
                raw = await ws.receive_text()
                reply = handle_message(session, raw)
                await ws.send_text(json.dumps(reply, sort_keys=True))
        except WebSocketDisconnect:
            pass
        finally:
            if ws in session.clients:
                session.clients.remove(ws)

    def handle_message(session: Session, raw: str) -> dict:
        try:
            msg = json.loads(raw)
            mtype = msg.get("type")
            of = msg.get("seq", 0)
        except json.JSONDecodeError:
            return {"type": "error", "seq": session.next_seq(), "of": None,
                    "message": "malformed message: not valid JSON"}
        if mtype == "command":
            v = msg.get("v")
            if (not isinstance(v, list) or len(v) != 2
                    or not all(isinstance(x, (int, float))
                               and math.isfinite(x) for x in v)):
                return {"type": "error", "seq": session.next_seq(),
                        "of": of, "message": "command needs finite [vx, vy]"}
            session.pending_cmd = (float(v[0]), float(v[1]))
            return {"type": "ack", "seq": session.next_seq(), "of": of}
        if mtype == "instruction":
            if session.level != "L3":
                return {"type": "error", "seq": session.next_seq(),
                        "of": of, "message": "instructions require L3",
                        "level": session.level}
            try:
                ins = Instruction(msg.get("kind"),
                                  tuple(msg.get("center", ())),
                                  float(msg.get("radius", 0.0)),
                                  issued_at=session.state.clock,
                                  clear=bool(msg.get("clear", False)))
            except (TypeError, ValueError) as e:
                return {"type": "error", "seq": session.next_seq(),
                        "of": of, "message": f"bad instruction: {e}"}
            session.pending_instr.append(ins)
            return {"type": "ack", "seq": session.next_seq(), "of": of,
                    "revision": session.state.registry.revision,
                    "queued": True}
        if mtype in ("hello", "control"):
            return {"type": "ack", "seq": session.next_seq(), "of": of,
                    "status": session.state.status,
                    "t": session.state.clock}
        return {"type": "error", "seq": session.next_seq(), "of": of,
                "message": f"unknown message type: {mtype!r}"}

    app.state.sessions = sessions
    app.state.write_log = write_log
    return app


def serve(config: EpisodeConfig, host: str = "127.0.0.1", port: int = 8000,
          log_dir=None):
    import uvicorn

    app = create_app(config, log_dir=log_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
