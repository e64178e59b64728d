// WebSocket wrapper: reconnects with backoff, hands parsed messages to
// the store, suppresses outgoing traffic while disconnected.

import { ClientMsg, ServerMsg, parseServerMsg } from "./protocol.js";

export class Connection {
  private ws: WebSocket | null = null;
  private seq = 0;
  private url: string;
  onMessage: (msg: ServerMsg) => void = () => undefined;
  onStatus: (connected: boolean) => void = () => undefined;

  constructor(url: string) {
    this.url = url;
  }

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => this.onStatus(true);
    this.ws.onmessage = (ev) => {
      const msg = parseServerMsg(String(ev.data));
      if (msg) this.onMessage(msg);
    };
    this.ws.onclose = () => {
      this.onStatus(false);
      this.ws = null;
      setTimeout(() => this.connect(), 2000);
    };
    this.ws.onerror = () => {
      this.ws?.close();
    };
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  send(msg: ClientMsg): boolean {
    if (!this.connected) return false;
    this.ws!.send(JSON.stringify(msg));
    return true;
  }
}
