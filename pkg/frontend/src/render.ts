// Immediate-mode canvas rendering of the session store.  Unexplored free
// space is darkened, explored space clear; walls are near-black.  The
// perceived overlay and plan polyline only exist when the store holds
// them (L2+), instruction markers at L3.

import { DragState, KIND_COLORS, dragRadius } from "./instructions.js";
import { PendingInstruction, SessionStore } from "./store.js";
import { Viewport } from "./transform.js";

const COLOR_WALL = "#16161a";
const COLOR_UNEXPLORED = "#3a3f4a";
const COLOR_EXPLORED = "#d9d3c2";
const COLOR_PERCEIVED = "rgba(80, 200, 180, 0.35)";
const COLOR_PLAN = "#f2c744";
const COLOR_ROBOT = "#ef7d21";
const COLOR_HUMAN = "#28b5e0";

export function draw(ctx: CanvasRenderingContext2D, store: SessionStore,
                     vp: Viewport, drag: DragState | null): void {
  const canvas = ctx.canvas;
  ctx.fillStyle = "#101014";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const grid = store.grid;
  if (!grid) return;
  const res = grid.resolution;
  const worldH = grid.height * res;
  const px = (wx: number, wy: number) => vp.toScreen(wx, wy, worldH);
  const cellPx = res * vp.scale + 0.5;

  for (let y = 0; y < grid.height; y++) {
    for (let x = 0; x < grid.width; x++) {
      const [sx, sy] = px(x * res, (y + 1) * res);
      ctx.fillStyle = grid.blocked[y][x] ? COLOR_WALL : COLOR_UNEXPLORED;
      ctx.fillRect(sx, sy, cellPx, cellPx);
    }
  }
  ctx.fillStyle = COLOR_EXPLORED;
  for (const cid of store.explored) {
    const [cx, cy] = grid.freeCells[cid];
    const [sx, sy] = px(cx * res, (cy + 1) * res);
    ctx.fillRect(sx, sy, cellPx, cellPx);
  }
  if (store.perceived) {
    ctx.fillStyle = COLOR_PERCEIVED;
    for (const cid of store.perceived) {
      const [cx, cy] = grid.freeCells[cid];
      const [sx, sy] = px(cx * res, (cy + 1) * res);
      ctx.fillRect(sx, sy, cellPx, cellPx);
    }
  }
  if (store.plan && store.plan.length > 1) {
    ctx.strokeStyle = COLOR_PLAN;
    ctx.lineWidth = 2;
    ctx.beginPath();
    store.plan.forEach(([wx, wy], i) => {
      const [sx, sy] = px(wx, wy);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.stroke();
  }
  if (store.instructions) {
    for (const ins of store.instructions) {
      drawRegion(ctx, vp, worldH, ins.kind, ins.center, ins.radius, false);
    }
  }
  for (const p of store.pending) {
    drawRegion(ctx, vp, worldH, p.kind, p.center, p.radius, true);
  }
  if (drag) {
    drawRegion(ctx, vp, worldH, drag.kind, drag.start, dragRadius(drag),
               true);
  }
  drawAgent(ctx, px(...store.robot), COLOR_ROBOT, vp.scale * 0.35);
  drawAgent(ctx, px(...store.human), COLOR_HUMAN, vp.scale * 0.35);
}

function drawRegion(ctx: CanvasRenderingContext2D, vp: Viewport,
                    worldH: number, kind: string,
                    center: [number, number], radius: number,
                    pending: boolean): void {
  const color = (KIND_COLORS as Record<string, string>)[kind] ?? "#ffffff";
  const [sx, sy] = vp.toScreen(center[0], center[1], worldH);
  ctx.beginPath();
  ctx.arc(sx, sy, radius * vp.scale, 0, Math.PI * 2);
  ctx.globalAlpha = pending ? 0.25 : 0.4;
  ctx.fillStyle = color;
  ctx.fill();
  ctx.globalAlpha = 1.0;
  ctx.strokeStyle = color;
  ctx.setLineDash(pending ? [6, 4] : []);
  ctx.lineWidth = 2;
  ctx.stroke();
  ctx.setLineDash([]);
}

function drawAgent(ctx: CanvasRenderingContext2D, at: [number, number],
                   color: string, r: number): void {
  ctx.beginPath();
  ctx.arc(at[0], at[1], Math.max(4, r), 0, Math.PI * 2);
  ctx.fillStyle = color;
  ctx.fill();
  ctx.strokeStyle = "#101014";
  ctx.lineWidth = 1.5;
  ctx.stroke();
}

export { PendingInstruction };
