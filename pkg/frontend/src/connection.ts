/**
 * WebSocket wrapper with reconnect backoff. While disconnected nothing is
 * queued: samples emitted with no connection are dropped and the caller
 * shows a banner instead.
 */

export interface ConnectionHooks {
  onFrame: (frame: string) => void;
  onOpen: () => void;
  onClose: (reason: string) => void;
}

export class Connection {
  private url: string;
  private hooks: ConnectionHooks;
  private socket: WebSocket | null = null;
  private backoff = 0.5;
  private closed = false;

  constructor(url: string, hooks: ConnectionHooks) {
    this.url = url;
    this.hooks = hooks;
    this.open();
  }

  get ready(): boolean {
    return this.socket !== null && this.socket.readyState === WebSocket.OPEN;
  }

  send(frame: string): boolean {
    if (!this.ready) return false;
    this.socket!.send(frame);
    return true;
  }

  shutdown(): void {
    this.closed = true;
    this.socket?.close();
  }

  private open(): void {
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.backoff = 0.5;
      this.hooks.onOpen();
    };
    socket.onmessage = (event) => this.hooks.onFrame(String(event.data));
    socket.onclose = (event) => {
      this.hooks.onClose(event.reason || `code ${event.code}`);
      if (!this.closed) {
        setTimeout(() => this.open(), this.backoff * 1000);
        this.backoff = Math.min(this.backoff * 2, 10);
      }
    };
    socket.onerror = () => socket.close();
  }
}
