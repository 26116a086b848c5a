/**
 * WebSocket connection to a session, with automatic reconnect (exponential
 * backoff) and a fresh viewer state per connection so a reconnect never
 * leaves ghost trails. The socket constructor and timer are injectable so
 * tests can drive the connection with a scripted fake.
 */
import {
  ClientMessage,
  encodeClientMessage,
  parseServerFrame,
  ServerFrame,
} from "./protocol.js";
import { ViewerState } from "./state.js";

/** The subset of the WebSocket API the connection relies on. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;
export type Scheduler = (fn: () => void, ms: number) => void;

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ConnectionOptions {
  socketFactory?: SocketFactory;
  scheduler?: Scheduler;
  onFrame?: (frame: ServerFrame, state: ViewerState) => void;
  onStatus?: (status: ConnectionStatus, retryInMs?: number) => void;
  maxBackoffMs?: number;
}

const INITIAL_BACKOFF_MS = 500;

export class ViewerConnection {
  readonly state = new ViewerState();
  status: ConnectionStatus = "connecting";

  private socket: SocketLike | null = null;
  private backoffMs = INITIAL_BACKOFF_MS;
  private closedByUser = false;
  private readonly socketFactory: SocketFactory;
  private readonly scheduler: Scheduler;
  private readonly maxBackoffMs: number;

  constructor(
    readonly url: string,
    private readonly options: ConnectionOptions = {},
  ) {
    this.socketFactory =
      options.socketFactory ??
      ((u) => new WebSocket(u) as unknown as SocketLike);
    this.scheduler = options.scheduler ?? ((fn, ms) => setTimeout(fn, ms));
    this.maxBackoffMs = options.maxBackoffMs ?? 15_000;
    this.open();
  }

  private setStatus(status: ConnectionStatus, retryInMs?: number): void {
    this.status = status;
    this.options.onStatus?.(status, retryInMs);
  }

  private open(): void {
    this.setStatus("connecting");
    // A new connection always starts from a fresh full snapshot.
    this.state.reset();
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = INITIAL_BACKOFF_MS;
      this.setStatus("connected");
    };
    socket.onmessage = (ev) => {
      const frame = parseServerFrame(ev.data);
      if (frame === null) return; // malformed/unknown frames are ignored
      if (this.state.apply(frame)) {
        this.options.onFrame?.(frame, this.state);
      }
    };
    socket.onerror = () => socket.close();
    socket.onclose = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      if (this.closedByUser) return;
      const retry = this.backoffMs;
      this.setStatus("disconnected", retry);
      this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
      this.scheduler(() => {
        if (!this.closedByUser) this.open();
      }, retry);
    };
  }

  /** Validate, encode and transmit a control message. Throws (and sends
   * nothing) if the message is invalid or the socket is down. */
  send(msg: ClientMessage): void {
    const payload = encodeClientMessage(msg);
    if (this.socket === null || this.status !== "connected") {
      throw new Error("not connected");
    }
    this.socket.send(payload);
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
    this.socket = null;
    this.setStatus("disconnected");
  }
}
