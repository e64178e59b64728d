// Client-side session state: applies the hello keyframe and state deltas,
// tracks pending instructions until the server acknowledges them.
//
// Level gating is server-enforced; the store only ever holds fields that
// actually arrived, so an L1 session can never render a plan or the
// perceived mask no matter what the drawing code asks for.

import {
  AckMsg, EndMsg, ErrorMsg, GridModel, HelloMsg, InstructionRecord, Level,
  ServerMsg, StateMsg, buildGrid,
} from "./protocol.js";

export interface PendingInstruction {
  seq: number;
  kind: string;
  center: [number, number];
  radius: number;
}

export class SessionStore {
  grid: GridModel | null = null;
  level: Level = "L1";
  dt = 0.1;
  maxSpeed = 1.0;
  clock = 0;
  status = "connecting";
  connected = false;
  robot: [number, number] = [0, 0];
  human: [number, number] = [0, 0];
  explored = new Set<number>();
  perceived: Set<number> | null = null;
  plan: [number, number][] | null = null;
  planSeq = -1;
  instructions: InstructionRecord[] | null = null;
  pending: PendingInstruction[] = [];
  toasts: string[] = [];
  lastSeq = 0;

  get hasPlanView(): boolean {
    return this.plan !== null;
  }

  applyServer(msg: ServerMsg): void {
    if (msg.seq <= this.lastSeq) return; // stale or duplicate frame
    this.lastSeq = msg.seq;
    switch (msg.type) {
      case "hello":
        this.applyHello(msg);
        break;
      case "state":
        this.applyState(msg);
        break;
      case "ack":
        this.applyAck(msg);
        break;
      case "error":
        this.applyError(msg);
        break;
      case "end":
        this.status = (msg as EndMsg).status;
        break;
    }
  }

  private applyHello(msg: HelloMsg): void {
    this.grid = buildGrid(msg.map);
    this.level = msg.level;
    this.dt = msg.dt;
    this.maxSpeed = msg.max_speed;
    const kf = msg.keyframe;
    this.clock = kf.clock;
    this.status = kf.status;
    this.robot = kf.robot;
    this.human = kf.human;
    this.explored = new Set(this.onlyFree(kf.true_explored));
    this.perceived = kf.robot_perceived
      ? new Set(this.onlyFree(kf.robot_perceived)) : null;
    this.plan = kf.plan ?? null;
    this.planSeq = kf.plan_seq ?? -1;
    this.instructions = kf.instructions ?? null;
    this.connected = true;
  }

  private applyState(msg: StateMsg): void {
    this.clock = msg.t;
    this.status = msg.status;
    this.robot = msg.robot;
    this.human = msg.human;
    for (const c of this.onlyFree(msg.explored_added)) this.explored.add(c);
    if (msg.perceived_added) {
      if (!this.perceived) this.perceived = new Set();
      for (const c of this.onlyFree(msg.perceived_added)) {
        this.perceived.add(c);
      }
    }
    if (msg.plan !== undefined) {
      this.plan = msg.plan;
      this.planSeq = msg.plan_seq ?? this.planSeq;
    }
    if (msg.instructions !== undefined) {
      this.instructions = msg.instructions;
    }
  }

  private applyAck(msg: AckMsg): void {
    this.pending = this.pending.filter((p) => p.seq !== msg.of);
  }

  private applyError(msg: ErrorMsg): void {
    this.pending = this.pending.filter((p) => p.seq !== msg.of);
    this.toasts.push(msg.message);
  }

  addPending(p: PendingInstruction): void {
    this.pending.push(p);
  }

  takeToasts(): string[] {
    const out = this.toasts;
    this.toasts = [];
    return out;
  }

  setDisconnected(): void {
    this.connected = false;
  }

  // every rendered overlay id must name a real free cell
  private onlyFree(ids: number[]): number[] {
    const n = this.grid ? this.grid.nFree : 0;
    return ids.filter((c) => Number.isInteger(c) && c >= 0 && c < n);
  }
}
