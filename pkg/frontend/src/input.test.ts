import { describe, expect, it } from "vitest";

import { CommandScheduler, KeyTracker, MIN_SEND_INTERVAL_MS,
         RESEND_INTERVAL_MS } from "./input.js";
import { DragState, dragRadius, instructionFromDrag,
         DEFAULT_RADIUS } from "./instructions.js";
import { Viewport } from "./transform.js";

describe("key tracker", () => {
  it("single key maps to an axis at max speed", () => {
    const k = new KeyTracker();
    k.press("ArrowRight");
    expect(k.velocity(1.0)).toEqual([1, 0]);
    k.release("ArrowRight");
    expect(k.velocity(1.0)).toEqual([0, 0]);
  });

  it("no input means zero velocity", () => {
    expect(new KeyTracker().velocity(1.0)).toEqual([0, 0]);
  });

  it("diagonals normalize to the speed limit", () => {
    const k = new KeyTracker();
    k.press("KeyW");
    k.press("KeyD");
    const [vx, vy] = k.velocity(2.0);
    expect(Math.hypot(vx, vy)).toBeCloseTo(2.0, 12);
    expect(vx).toBeGreaterThan(0);
    expect(vy).toBeGreaterThan(0);
  });

  it("opposite keys cancel", () => {
    const k = new KeyTracker();
    k.press("ArrowLeft");
    k.press("ArrowRight");
    expect(k.velocity(1.0)).toEqual([0, 0]);
  });

  it("ignores unknown codes", () => {
    const k = new KeyTracker();
    expect(k.press("KeyZ")).toBe(false);
    expect(k.velocity(1.0)).toEqual([0, 0]);
  });
});

describe("command scheduler", () => {
  it("never exceeds 20 Hz", () => {
    const s = new CommandScheduler();
    let sent = 0;
    for (let t = 0; t <= 1000; t += 10) {
      // velocity changes every sample: only the rate cap limits it
      if (s.shouldSend([t, 0], t)) sent += 1;
    }
    expect(sent).toBeLessThanOrEqual(1000 / MIN_SEND_INTERVAL_MS + 1);
    expect(sent).toBeGreaterThanOrEqual(10); // still >= 10 Hz
  });

  it("re-sends unchanged velocity at the keep-alive rate", () => {
    const s = new CommandScheduler();
    expect(s.shouldSend([0, 0], 0)).toBe(true);
    expect(s.shouldSend([0, 0], 60)).toBe(false);
    expect(s.shouldSend([0, 0], RESEND_INTERVAL_MS)).toBe(true);
  });

  it("sends changes as soon as the cap allows", () => {
    const s = new CommandScheduler();
    s.shouldSend([0, 0], 0);
    expect(s.shouldSend([1, 0], 40)).toBe(false);  // under the cap
    expect(s.shouldSend([1, 0], MIN_SEND_INTERVAL_MS)).toBe(true);
  });
});

describe("instruction drags", () => {
  it("click without drag uses the default radius", () => {
    const d: DragState = { kind: "GoTo", start: [3, 4], current: [3, 4] };
    expect(dragRadius(d)).toBe(DEFAULT_RADIUS);
  });

  it("drag distance becomes the radius", () => {
    const d: DragState = { kind: "Avoid", start: [0, 0], current: [3, 4] };
    expect(dragRadius(d)).toBe(5);
    const msg = instructionFromDrag(d, 12);
    expect(msg).toEqual({ type: "instruction", seq: 12, kind: "Avoid",
                          center: [0, 0], radius: 5 });
  });
});

describe("viewport", () => {
  it("round-trips world and screen", () => {
    const vp = new Viewport();
    vp.fit(30, 18, 1280, 760);
    const [sx, sy] = vp.toScreen(7.25, 3.5, 18);
    const [wx, wy] = vp.toWorld(sx, sy, 18);
    expect(wx).toBeCloseTo(7.25, 9);
    expect(wy).toBeCloseTo(3.5, 9);
  });

  it("screen y is flipped", () => {
    const vp = new Viewport();
    vp.fit(10, 10, 100, 100, 0);
    const [, yLow] = vp.toScreen(0, 0, 10);
    const [, yHigh] = vp.toScreen(0, 10, 10);
    expect(yLow).toBeGreaterThan(yHigh);
  });

  it("zoom keeps the anchor fixed", () => {
    const vp = new Viewport();
    vp.fit(10, 10, 100, 100, 0);
    const before = vp.toWorld(40, 60, 10);
    vp.zoomAt(40, 60, 1.5);
    const after = vp.toWorld(40, 60, 10);
    expect(after[0]).toBeCloseTo(before[0], 9);
    expect(after[1]).toBeCloseTo(before[1], 9);
  });
});
