// Console state: a reducer over server frames and operator actions.
// Cumulative returns are kept exactly as streamed; the ring buffer holds the
// last full episode of per-objective returns for the sparklines.

import type { PolicyDescriptor, ServerFrame, StateFrame } from "./protocol";

export const EPISODE_CAPACITY = 512;
export const ACK_TIMEOUT_MS = 2000;

export type SteeringMode = "weights" | "pcn-target";

export interface PendingCommand {
    cmdId: number;
    sentAt: number;
}

export interface ConsoleState {
    connection: "connecting" | "open" | "closed";
    frame: StateFrame | null;
    history: number[][]; // ring buffer of cum_return vectors, oldest first
    pending: PendingCommand | null;
    lastAck: { cmdId: number; effectiveStep: number } | null;
    lastError: string | null;
    episodeOver: boolean;
    mode: SteeringMode;
    nextCmdId: number;
}

export function initialState(): ConsoleState {
    return {
        connection: "connecting",
        frame: null,
        history: [],
        pending: null,
        lastAck: null,
        lastError: null,
        episodeOver: false,
        mode: "weights",
        nextCmdId: 1,
    };
}

export function onFrame(state: ConsoleState, frame: ServerFrame): ConsoleState {
    switch (frame.type) {
        case "state": {
            const history =
                frame.t === 0 ? [] : [...state.history, frame.cum_return];
            while (history.length > EPISODE_CAPACITY) {
                history.shift();
            }
            return {
                ...state,
                frame,
                history,
                episodeOver: frame.t === 0 ? false : state.episodeOver,
            };
        }
        case "ack":
            return {
                ...state,
                pending:
                    state.pending && state.pending.cmdId === frame.cmd_id
                        ? null
                        : state.pending,
                lastAck: { cmdId: frame.cmd_id, effectiveStep: frame.effective_step },
                lastError: null,
            };
        case "error":
            return { ...state, pending: null, lastError: frame.detail };
        case "episode_end":
            return { ...state, episodeOver: true };
    }
}

export function onConnectionChange(
    state: ConsoleState,
    connection: ConsoleState["connection"],
): ConsoleState {
    return { ...state, connection, pending: connection === "open" ? state.pending : null };
}

export function markSent(state: ConsoleState, cmdId: number, now: number): ConsoleState {
    return { ...state, pending: { cmdId, sentAt: now }, nextCmdId: cmdId + 1 };
}

export function expirePending(state: ConsoleState, now: number): ConsoleState {
    if (state.pending && now - state.pending.sentAt >= ACK_TIMEOUT_MS) {
        return { ...state, pending: null, lastError: "command timed out" };
    }
    return state;
}

export function controlsEnabled(state: ConsoleState): boolean {
    return state.connection === "open" && state.pending === null;
}

export function activePolicy(state: ConsoleState): PolicyDescriptor | null {
    return state.frame ? state.frame.active_policy : null;
}
