// Keyboard state -> velocity commands.  Arrow keys and WASD; diagonals
// are normalized to the speed limit; released keys mean zero velocity.
// Commands go out on a fixed schedule (>= 10 Hz) through a rate limiter
// capped at 20 Hz.

const KEY_AXES: Record<string, [number, number]> = {
  ArrowUp: [0, 1], KeyW: [0, 1],
  ArrowDown: [0, -1], KeyS: [0, -1],
  ArrowLeft: [-1, 0], KeyA: [-1, 0],
  ArrowRight: [1, 0], KeyD: [1, 0],
};

export class KeyTracker {
  private down = new Set<string>();

  press(code: string): boolean {
    if (!(code in KEY_AXES)) return false;
    this.down.add(code);
    return true;
  }

  release(code: string): boolean {
    return this.down.delete(code);
  }

  releaseAll(): void {
    this.down.clear();
  }

  velocity(maxSpeed: number): [number, number] {
    let vx = 0;
    let vy = 0;
    for (const code of this.down) {
      const [ax, ay] = KEY_AXES[code];
      vx += ax;
      vy += ay;
    }
    const norm = Math.hypot(vx, vy);
    if (norm === 0) return [0, 0];
    return [(vx / norm) * maxSpeed, (vy / norm) * maxSpeed];
  }
}

export const MIN_SEND_INTERVAL_MS = 50;   // 20 Hz cap
export const RESEND_INTERVAL_MS = 100;    // keep-alive resend at 10 Hz

export class CommandScheduler {
  private lastSent = -Infinity;
  private lastV: [number, number] | null = null;

  /** Decide whether to send v at time nowMs.  Unchanged velocities are
   * re-sent at the keep-alive rate, changes as soon as the 20 Hz cap
   * allows. */
  shouldSend(v: [number, number], nowMs: number): boolean {
    if (nowMs - this.lastSent < MIN_SEND_INTERVAL_MS) return false;
    const changed = this.lastV === null
      || v[0] !== this.lastV[0] || v[1] !== this.lastV[1];
    if (!changed && nowMs - this.lastSent < RESEND_INTERVAL_MS) {
      return false;
    }
    this.lastSent = nowMs;
    this.lastV = [v[0], v[1]];
    return true;
  }

  reset(): void {
    this.lastSent = -Infinity;
    this.lastV = null;
  }
}
