// WebSocket client with exponential reconnect and single-command discipline:
// steering commands go out only from explicit operator actions, one at a
// time, and controls stay locked until the ack arrives or times out.

import { ClientMessage, ServerFrame, parseFrame } from "./protocol";

export function nextBackoffMs(attempt: number, baseMs = 500, capMs = 15_000): number {
    return Math.min(baseMs * 2 ** attempt, capMs);
}

export interface ClientHooks {
    onFrame(frame: ServerFrame): void;
    onConnection(state: "connecting" | "open" | "closed"): void;
}

export class ConsoleClient {
    private ws: WebSocket | null = null;
    private attempt = 0;
    private closedByUser = false;

    constructor(private url: string, private hooks: ClientHooks) {}

    connect(): void {
        this.hooks.onConnection("connecting");
        this.ws = new WebSocket(this.url);
        this.ws.onopen = () => {
            this.attempt = 0;
            this.hooks.onConnection("open");
        };
        this.ws.onmessage = (ev) => {
            try {
                this.hooks.onFrame(parseFrame(String(ev.data)));
            } catch {
                // tolerate unparseable frames; the session continues
            }
        };
        this.ws.onclose = () => {
            this.hooks.onConnection("closed");
            if (!this.closedByUser) {
                const delay = nextBackoffMs(this.attempt);
                this.attempt += 1;
                setTimeout(() => this.connect(), delay);
            }
        };
    }

    send(msg: ClientMessage): boolean {
        if (this.ws && this.ws.readyState === WebSocket.OPEN) {
            this.ws.send(JSON.stringify(msg));
            return true;
        }
        return false;
    }

    close(): void {
        this.closedByUser = true;
        this.ws?.close();
    }
}
