// Wire protocol of the steering service: JSON text frames over WebSocket.

export interface HostView {
    id: string;
    known_level: "None" | "Unknown" | "UserAccess" | "Privileged";
    ports: number;
    scan: boolean;
    exploit: boolean;
}

export interface PolicyDescriptor {
    kind: "weights" | "pcn";
    tag: string;
    w?: number[];
    return?: number[];
    horizon?: number;
}

export interface StateFrame {
    type: "state";
    t: number;
    cum_return: number[];
    reward: number[];
    hosts: HostView[];
    active_policy: PolicyDescriptor;
}

export interface AckFrame {
    type: "ack";
    cmd_id: number;
    effective_step: number;
}

export interface ErrorFrame {
    type: "error";
    detail: string;
}

export interface EpisodeEndFrame {
    type: "episode_end";
    summary: { t: number; seed: number; cum_return: number[] };
}

export type ServerFrame = StateFrame | AckFrame | ErrorFrame | EpisodeEndFrame;

export type ClientMessage =
    | { type: "set_weights"; cmd_id: number; w: number[] }
    | { type: "set_target"; cmd_id: number; return: number[]; horizon: number }
    | { type: "pause" }
    | { type: "resume" }
    | { type: "reset"; seed: number }
    | { type: "set_speed"; steps_per_sec: number }
    | { type: "step" };

export function parseFrame(raw: string): ServerFrame {
    const msg = JSON.parse(raw);
    if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
        throw new Error(`malformed frame: ${raw.slice(0, 80)}`);
    }
    switch (msg.type) {
        case "state":
            if (!Array.isArray(msg.cum_return) || !Array.isArray(msg.hosts)) {
                throw new Error("state frame missing cum_return/hosts");
            }
            return msg as StateFrame;
        case "ack":
            if (typeof msg.cmd_id !== "number" || typeof msg.effective_step !== "number") {
                throw new Error("ack frame missing cmd_id/effective_step");
            }
            return msg as AckFrame;
        case "error":
            return { type: "error", detail: String(msg.detail ?? "unknown error") };
        case "episode_end":
            return msg as EpisodeEndFrame;
        default:
            throw new Error(`unknown frame type ${msg.type}`);
    }
}

// Client-side validation mirrors the server's checks so obviously bad
// commands never reach the wire.

export function buildSetWeights(cmdId: number, w: number[]): ClientMessage {
    if (w.length !== 2 || w.some((v) => !Number.isFinite(v) || v < 0)) {
        throw new Error("weights must be two non-negative numbers");
    }
    return { type: "set_weights", cmd_id: cmdId, w };
}

export function buildSetTarget(cmdId: number, target: number[], horizon: number): ClientMessage {
    if (target.length !== 2 || target.some((v) => !Number.isFinite(v))) {
        throw new Error("target return must be two finite numbers");
    }
    if (!Number.isInteger(horizon) || horizon < 1) {
        throw new Error("horizon must be a positive integer");
    }
    return { type: "set_target", cmd_id: cmdId, return: target, horizon };
}
