/**
 * One WebSocket channel to the server, with automatic rejoin.
 *
 * The connection owns the join handshake, a keepalive ping, and
 * exponential-backoff reconnection. Everything received is parsed and
 * handed to a single onMessage callback; the socket constructor is
 * injectable so tests can run without a browser.
 */

import { joinMessage, parseServerMessage, pingMessage, type ClientMessage, type ServerMessage } from "./protocol.js";

export type ConnectionStatus = "connecting" | "online" | "offline";

/** The subset of the WebSocket interface the connection relies on. */
export interface ChannelSocket {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface ConnectionOptions {
  url: string;
  user: string;
  workspace: string | null;
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (status: ConnectionStatus) => void;
  /** Socket constructor; defaults to the browser WebSocket. */
  createSocket?: (url: string) => ChannelSocket;
  /** Keepalive period; the server drops sessions silent for 30 s. */
  pingIntervalMs?: number;
  reconnect?: boolean;
}

const RECONNECT_BASE_MS = 500;
const RECONNECT_MAX_MS = 10_000;

export class Connection {
  status: ConnectionStatus = "connecting";

  private readonly opts: ConnectionOptions;
  private socket: ChannelSocket | null = null;
  private open = false;
  private closed = false;
  private attempts = 0;
  private pingTimer: ReturnType<typeof setInterval> | null = null;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(opts: ConnectionOptions) {
    this.opts = opts;
  }

  connect(): void {
    if (this.closed) return;
    this.setStatus("connecting");
    const create =
      this.opts.createSocket ?? ((url: string) => new WebSocket(url) as unknown as ChannelSocket);
    let socket: ChannelSocket;
    try {
      socket = create(this.opts.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.open = true;
      this.attempts = 0;
      socket.send(JSON.stringify(joinMessage(this.opts.user, this.opts.workspace)));
      this.setStatus("online");
      this.startPing();
    };
    socket.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg !== null) this.opts.onMessage(msg);
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
    socket.onclose = () => {
      this.open = false;
      this.stopPing();
      if (!this.closed) {
        this.setStatus("offline");
        this.scheduleReconnect();
      }
    };
  }

  /** Send one client message; returns false when the channel is down. */
  send(msg: ClientMessage): boolean {
    if (!this.open || this.socket === null) return false;
    try {
      this.socket.send(JSON.stringify(msg));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closed = true;
    this.stopPing();
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
    this.setStatus("offline");
  }

  /** Drop the socket and rejoin, e.g. to resync after a stream gap. */
  refresh(): void {
    if (this.closed) return;
    if (this.socket !== null) {
      this.socket.close(); // onclose schedules the reconnect
    } else {
      this.scheduleReconnect();
    }
  }

  private scheduleReconnect(): void {
    if (this.closed || this.opts.reconnect === false) return;
    const delay = Math.min(RECONNECT_BASE_MS * 2 ** this.attempts, RECONNECT_MAX_MS);
    this.attempts += 1;
    this.reconnectTimer = setTimeout(() => this.connect(), delay);
  }

  private startPing(): void {
    const interval = this.opts.pingIntervalMs ?? 10_000;
    if (interval <= 0) return;
    this.pingTimer = setInterval(() => this.send(pingMessage()), interval);
  }

  private stopPing(): void {
    if (this.pingTimer !== null) {
      clearInterval(this.pingTimer);
      this.pingTimer = null;
    }
  }

  private setStatus(status: ConnectionStatus): void {
    if (this.status === status) return;
    this.status = status;
    this.opts.onStatus?.(status);
  }
}
