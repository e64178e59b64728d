// Wire protocol shared with the session service: JSON text frames over a
// single WebSocket, monotone sequence numbers in both directions.

export type Level = "L1" | "L2" | "L3";

export interface MapPayload {
  width: number;
  height: number;
  resolution: number;
  origin: [number, number];
  occupancy: string[]; // '#' blocked, '.' free
}

export interface InstructionRecord {
  kind: string;
  center: [number, number];
  radius: number;
  issued_at: number;
  expires_at: number | null;
}

export interface HelloMsg {
  type: "hello";
  seq: number;
  session: string;
  level: Level;
  map: MapPayload;
  n_free: number;
  dt: number;
  max_speed: number;
  keyframe: {
    clock: number;
    status: string;
    robot: [number, number];
    human: [number, number];
    true_explored: number[];
    robot_perceived?: number[];
    plan?: [number, number][];
    plan_seq?: number;
    instructions?: InstructionRecord[];
  };
}

export interface StateMsg {
  type: "state";
  seq: number;
  t: number;
  status: string;
  robot: [number, number];
  human: [number, number];
  explored_added: number[];
  perceived_added?: number[];
  plan?: [number, number][];
  plan_seq?: number;
  instructions?: InstructionRecord[];
}

export interface AckMsg {
  type: "ack";
  seq: number;
  of: number;
  revision?: number;
}

export interface ErrorMsg {
  type: "error";
  seq: number;
  of: number | null;
  message: string;
  level?: string;
}

export interface EndMsg {
  type: "end";
  seq: number;
  status: string;
  t: number;
}

export type ServerMsg = HelloMsg | StateMsg | AckMsg | ErrorMsg | EndMsg;

export interface CommandMsg {
  type: "command";
  seq: number;
  v: [number, number];
}

export interface InstructionMsg {
  type: "instruction";
  seq: number;
  kind: string;
  center: [number, number];
  radius: number;
  clear?: boolean;
}

export type ClientMsg = CommandMsg | InstructionMsg;

export function parseServerMsg(raw: string): ServerMsg | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const t = (data as { type?: unknown }).type;
  if (t === "hello" || t === "state" || t === "ack" || t === "error" ||
      t === "end") {
    return data as ServerMsg;
  }
  return null;
}

// Free cells are enumerated row-major, exactly like the server does it.
export interface GridModel {
  width: number;
  height: number;
  resolution: number;
  origin: [number, number];
  blocked: boolean[][];       // [y][x]
  freeCells: [number, number][]; // id -> (cx, cy)
  nFree: number;
}

export function buildGrid(map: MapPayload): GridModel {
  const blocked: boolean[][] = [];
  const freeCells: [number, number][] = [];
  for (let y = 0; y < map.height; y++) {
    const row = map.occupancy[y];
    const brow: boolean[] = [];
    for (let x = 0; x < map.width; x++) {
      const b = row[x] === "#";
      brow.push(b);
      if (!b) freeCells.push([x, y]);
    }
    blocked.push(brow);
  }
  return {
    width: map.width,
    height: map.height,
    resolution: map.resolution,
    origin: map.origin,
    blocked,
    freeCells,
    nFree: freeCells.length,
  };
}
