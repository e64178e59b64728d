// Client wiring: connection, store, input sampling, toolbar, render loop.
// Configuration comes from URL query parameters:
//   ?server=ws://127.0.0.1:8000&session=s1&level=L3

import { CommandScheduler, KeyTracker } from "./input.js";
import { DragState, INSTRUCTION_KINDS, InstructionKind, KIND_COLORS,
         instructionFromDrag, isInstructionKind } from "./instructions.js";
import { draw } from "./render.js";
import { SessionStore } from "./store.js";
import { Viewport } from "./transform.js";
import { Connection } from "./net.js";

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? "ws://127.0.0.1:8000";
const session = params.get("session") ?? "default";
const level = params.get("level") ?? "L1";
const wsUrl = `${server.replace(/\/$/, "")}/ws?session=` +
  `${encodeURIComponent(session)}&level=${encodeURIComponent(level)}`;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const banner = document.getElementById("banner")!;
const statusLine = document.getElementById("status")!;
const toolbar = document.getElementById("toolbar")!;
const toastBox = document.getElementById("toasts")!;

const store = new SessionStore();
const keys = new KeyTracker();
const scheduler = new CommandScheduler();
const vp = new Viewport();
const conn = new Connection(wsUrl);

let armed: InstructionKind | null = null;
let drag: DragState | null = null;
let fitted = false;

conn.onMessage = (msg) => {
  store.applyServer(msg);
  if (msg.type === "hello" && store.grid && !fitted) {
    fitted = true;
    vp.fit(store.grid.width * store.grid.resolution,
           store.grid.height * store.grid.resolution,
           canvas.width, canvas.height);
    buildToolbar();
  }
  for (const text of store.takeToasts()) toast(text);
};
conn.onStatus = (up) => {
  if (!up) {
    store.setDisconnected();
    keys.releaseAll();
    scheduler.reset();
  } else {
    store.connected = true;
  }
  banner.style.display = up ? "none" : "block";
};
conn.connect();

function buildToolbar(): void {
  toolbar.innerHTML = "";
  if (store.level !== "L3") {
    const note = document.createElement("span");
    note.className = "hint";
    note.textContent = `level ${store.level}: instructions disabled`;
    toolbar.appendChild(note);
    return;
  }
  for (const kind of INSTRUCTION_KINDS) {
    const b = document.createElement("button");
    b.textContent = kind;
    b.style.borderColor = KIND_COLORS[kind];
    b.onclick = () => {
      armed = armed === kind ? null : kind;
      refreshToolbar();
    };
    b.dataset.kind = kind;
    toolbar.appendChild(b);
  }
  refreshToolbar();
}

function refreshToolbar(): void {
  for (const b of Array.from(toolbar.querySelectorAll("button"))) {
    b.classList.toggle("armed", b.dataset.kind === armed);
  }
}

function toast(text: string): void {
  const el = document.createElement("div");
  el.className = "toast";
  el.textContent = text;
  toastBox.appendChild(el);
  setTimeout(() => el.remove(), 4000);
}

// -- input: keyboard -> velocity commands ----------------------------------

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  if (keys.press(ev.code)) ev.preventDefault();
  if (ev.code === "Escape") {
    armed = null;
    drag = null;
    refreshToolbar();
  }
});
window.addEventListener("keyup", (ev) => {
  if (keys.release(ev.code)) ev.preventDefault();
});
window.addEventListener("blur", () => keys.releaseAll());

setInterval(() => {
  if (!store.connected) return; // suppressed while disconnected
  const v = keys.velocity(store.maxSpeed);
  if (scheduler.shouldSend(v, performance.now())) {
    conn.send({ type: "command", seq: conn.nextSeq(), v });
  }
}, 50);

// -- instruction placement: click-drag --------------------------------------

function worldOf(ev: MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  const grid = store.grid;
  const worldH = grid ? grid.height * grid.resolution : 0;
  return vp.toWorld(ev.clientX - rect.left, ev.clientY - rect.top, worldH);
}

canvas.addEventListener("mousedown", (ev) => {
  if (store.level !== "L3") {
    if (armed !== null) toast("instructions require L3");
    return;
  }
  if (!armed || !store.grid) return;
  const w = worldOf(ev);
  drag = { kind: armed, start: w, current: w };
});
canvas.addEventListener("mousemove", (ev) => {
  if (drag) drag.current = worldOf(ev);
});
canvas.addEventListener("mouseup", () => {
  if (!drag) return;
  const msg = instructionFromDrag(drag, conn.nextSeq());
  if (conn.send(msg) && isInstructionKind(msg.kind)) {
    store.addPending({ seq: msg.seq, kind: msg.kind,
                       center: msg.center, radius: msg.radius });
  }
  drag = null;
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  vp.zoomAt(ev.offsetX, ev.offsetY, ev.deltaY < 0 ? 1.15 : 1 / 1.15);
}, { passive: false });

// -- render loop -------------------------------------------------------------

function frame(): void {
  draw(ctx, store, vp, drag);
  const frac = store.grid
    ? (store.explored.size / store.grid.nFree * 100).toFixed(1) : "0.0";
  statusLine.textContent =
    `t=${store.clock.toFixed(1)}s  ${store.status}  ` +
    `explored ${frac}%  level ${store.level}` +
    (store.planSeq >= 0 && store.hasPlanView
      ? `  plan #${store.planSeq}` : "");
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
