// Instruction placement: a toolbar arms a kind, click-drag defines the
// region (drag distance = radius).  Marker colors follow the legend:
// go-to green, pass-through blue, avoid red, claimed area brown,
// been-here in the explored-overlay style.

import { InstructionMsg } from "./protocol.js";

export const INSTRUCTION_KINDS = [
  "GoTo", "PassThrough", "Avoid", "ImGoingTo", "BeenHere",
] as const;
export type InstructionKind = (typeof INSTRUCTION_KINDS)[number];

export const KIND_COLORS: Record<InstructionKind, string> = {
  GoTo: "#2e9e4f",
  PassThrough: "#2d6fd1",
  Avoid: "#d13b2d",
  ImGoingTo: "#8b5a2b",
  BeenHere: "#9a9a9a",
};

export const MIN_RADIUS = 0.5;
export const DEFAULT_RADIUS = 1.5;

export interface DragState {
  kind: InstructionKind;
  start: [number, number]; // world coords
  current: [number, number];
}

export function dragRadius(drag: DragState): number {
  const r = Math.hypot(drag.current[0] - drag.start[0],
                       drag.current[1] - drag.start[1]);
  return r < MIN_RADIUS ? DEFAULT_RADIUS : r;
}

export function instructionFromDrag(drag: DragState,
                                    seq: number): InstructionMsg {
  return {
    type: "instruction",
    seq,
    kind: drag.kind,
    center: [drag.start[0], drag.start[1]],
    radius: dragRadius(drag),
  };
}

export function isInstructionKind(s: string): s is InstructionKind {
  return (INSTRUCTION_KINDS as readonly string[]).includes(s);
}
