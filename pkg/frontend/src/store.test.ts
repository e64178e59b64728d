import { describe, expect, it } from "vitest";

import { HelloMsg, StateMsg, buildGrid, parseServerMsg } from "./protocol.js";
import { SessionStore } from "./store.js";

const MAP = {
  width: 4,
  height: 3,
  resolution: 1.0,
  origin: [0, 0] as [number, number],
  occupancy: ["....", ".#..", "...."],
};

function hello(level: "L1" | "L2" | "L3"): HelloMsg {
  const kf: HelloMsg["keyframe"] = {
    clock: 0,
    status: "running",
    robot: [0.5, 0.5],
    human: [1.5, 0.5],
    true_explored: [0, 1, 2],
  };
  if (level !== "L1") {
    kf.robot_perceived = [0, 1];
    kf.plan = [[0.5, 0.5], [1.5, 0.5]];
    kf.plan_seq = 1;
  }
  if (level === "L3") kf.instructions = [];
  return {
    type: "hello", seq: 1, session: "s", level,
    map: MAP, n_free: 11, dt: 0.1, max_speed: 1.0, keyframe: kf,
  };
}

function state(seq: number, extra: Partial<StateMsg> = {}): StateMsg {
  return {
    type: "state", seq, t: seq * 0.1, status: "running",
    robot: [0.5, 0.5], human: [1.5, 0.5], explored_added: [],
    ...extra,
  };
}

describe("grid model", () => {
  it("enumerates free cells row-major", () => {
    const g = buildGrid(MAP);
    expect(g.nFree).toBe(11);
    expect(g.freeCells[0]).toEqual([0, 0]);
    expect(g.freeCells[4]).toEqual([0, 1]); // skips the wall at (1,1)
    expect(g.freeCells[5]).toEqual([2, 1]);
  });
});

describe("session store", () => {
  it("applies keyframe and deltas", () => {
    const s = new SessionStore();
    s.applyServer(hello("L2"));
    expect(s.explored.size).toBe(3);
    s.applyServer(state(2, { explored_added: [3, 4] }));
    expect(s.explored.size).toBe(5);
    expect(s.clock).toBeCloseTo(0.2);
  });

  it("ignores stale frames", () => {
    const s = new SessionStore();
    s.applyServer(hello("L1"));
    s.applyServer(state(5, { explored_added: [3] }));
    s.applyServer(state(4, { explored_added: [9] })); // out of order
    expect(s.explored.has(9)).toBe(false);
  });

  it("L1 never holds plan or perceived state", () => {
    const s = new SessionStore();
    s.applyServer(hello("L1"));
    for (let i = 2; i < 10; i++) s.applyServer(state(i));
    expect(s.plan).toBeNull();
    expect(s.perceived).toBeNull();
    expect(s.instructions).toBeNull();
    expect(s.hasPlanView).toBe(false);
  });

  it("L2 carries perceived and plan, not instructions", () => {
    const s = new SessionStore();
    s.applyServer(hello("L2"));
    s.applyServer(state(2, {
      perceived_added: [5], plan: [[0.5, 0.5]], plan_seq: 2,
    }));
    expect(s.perceived?.has(5)).toBe(true);
    expect(s.planSeq).toBe(2);
    expect(s.instructions).toBeNull();
  });

  it("drops overlay ids outside the free-cell set", () => {
    const s = new SessionStore();
    s.applyServer(hello("L1"));
    s.applyServer(state(2, { explored_added: [10, 11, 99, -3] }));
    expect(s.explored.has(10)).toBe(true);
    expect(s.explored.has(11)).toBe(false);   // only 11 free cells: 0..10
    expect(s.explored.has(99)).toBe(false);
    for (const c of s.explored) {
      expect(c).toBeGreaterThanOrEqual(0);
      expect(c).toBeLessThan(s.grid!.nFree);
    }
  });

  it("pending instructions clear on ack, error raises a toast", () => {
    const s = new SessionStore();
    s.applyServer(hello("L3"));
    s.addPending({ seq: 7, kind: "GoTo", center: [1, 1], radius: 1 });
    s.addPending({ seq: 8, kind: "Avoid", center: [2, 2], radius: 1 });
    s.applyServer({ type: "ack", seq: 2, of: 7 });
    expect(s.pending.map((p) => p.seq)).toEqual([8]);
    s.applyServer({ type: "error", seq: 3, of: 8,
                    message: "instructions require L3" });
    expect(s.pending).toEqual([]);
    expect(s.takeToasts()).toEqual(["instructions require L3"]);
    expect(s.takeToasts()).toEqual([]);
  });

  it("end message sets terminal status", () => {
    const s = new SessionStore();
    s.applyServer(hello("L1"));
    s.applyServer({ type: "end", seq: 9, status: "found_by_human", t: 3.2 });
    expect(s.status).toBe("found_by_human");
  });
});

describe("protocol parsing", () => {
  it("accepts known types and rejects junk", () => {
    expect(parseServerMsg(JSON.stringify({ type: "state", seq: 1 }))?.type)
      .toBe("state");
    expect(parseServerMsg("{not json")).toBeNull();
    expect(parseServerMsg(JSON.stringify({ type: "mystery" }))).toBeNull();
    expect(parseServerMsg("42")).toBeNull();
  });
});
