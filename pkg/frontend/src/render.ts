// HTML-string renderers. Pure functions from console state to markup so the
// view layer is testable without a browser; main.ts assigns innerHTML.

import { fmt6 } from "./format";
import type { HostView } from "./protocol";
import { ConsoleState, activePolicy, controlsEnabled } from "./state";

const LEVEL_CLASS: Record<HostView["known_level"], string> = {
    None: "level-none",
    Unknown: "level-unknown",
    UserAccess: "level-user",
    Privileged: "level-priv",
};

function esc(s: string): string {
    return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderHostGrid(hosts: HostView[]): string {
    const cells = hosts.map((h) => {
        const flags = `${h.scan ? "S" : ""}${h.exploit ? "X" : ""}`;
        return (
            `<div class="host ${LEVEL_CLASS[h.known_level]}" data-host="${esc(h.id)}">` +
            `<span class="host-name">${esc(h.id)}</span>` +
            `<span class="host-ports">${h.ports}</span>` +
            (flags ? `<span class="host-flags">${flags}</span>` : "") +
            `</div>`
        );
    });
    return `<div class="host-grid">${cells.join("")}</div>`;
}

export function renderReturns(state: ConsoleState): string {
    const frame = state.frame;
    if (!frame) {
        return `<div class="returns">waiting for first frame</div>`;
    }
    const cells = frame.cum_return
        .map(
            (v, i) =>
                `<div class="return-cell"><span class="return-label">objective ${i}</span>` +
                `<span class="return-value" id="cum-return-${i}">${fmt6(v)}</span></div>`,
        )
        .join("");
    return `<div class="returns" data-t="${frame.t}">${cells}</div>`;
}

export function sparklinePoints(
    history: number[][],
    objective: number,
    width = 240,
    height = 48,
): string {
    if (history.length === 0) {
        return "";
    }
    const values = history.map((v) => v[objective]);
    const lo = Math.min(...values, 0);
    const hi = Math.max(...values, 0);
    const span = hi - lo || 1;
    const step = history.length > 1 ? width / (history.length - 1) : 0;
    return values
        .map((v, i) => `${(i * step).toFixed(1)},${(height - ((v - lo) / span) * height).toFixed(1)}`)
        .join(" ");
}

export function renderSparkline(state: ConsoleState, objective: number): string {
    const pts = sparklinePoints(state.history, objective);
    return (
        `<svg class="spark" viewBox="0 0 240 48" preserveAspectRatio="none">` +
        (pts ? `<polyline fill="none" points="${pts}"></polyline>` : "") +
        `</svg>`
    );
}

export function renderPolicyIndicator(state: ConsoleState): string {
    const pol = activePolicy(state);
    if (!pol) {
        return `<div class="policy">no policy</div>`;
    }
    if (pol.kind === "pcn") {
        const target = (pol.return ?? []).map(fmt6).join(", ");
        return `<div class="policy policy-pcn">prompted: [${target}] over ${pol.horizon} steps</div>`;
    }
    const w = (pol.w ?? []).map((v) => v.toFixed(2)).join(", ");
    return `<div class="policy policy-weights">${esc(pol.tag)} [${w}]</div>`;
}

export function renderStatus(state: ConsoleState): string {
    const bits: string[] = [];
    if (state.connection !== "open") {
        bits.push(`<div class="banner banner-disconnected">disconnected, retrying…</div>`);
    }
    if (state.episodeOver) {
        bits.push(`<div class="banner banner-episode">episode finished, reset to continue</div>`);
    }
    if (state.lastError) {
        bits.push(`<div class="banner banner-error">${esc(state.lastError)}</div>`);
    }
    if (state.pending) {
        bits.push(`<div class="banner banner-pending">awaiting ack #${state.pending.cmdId}</div>`);
    } else if (state.lastAck) {
        bits.push(
            `<div class="banner banner-ack">command #${state.lastAck.cmdId} effective at step ` +
            `${state.lastAck.effectiveStep}</div>`,
        );
    }
    return bits.join("");
}

export function renderControlsDisabled(state: ConsoleState): boolean {
    return !controlsEnabled(state);
}

export function renderAll(state: ConsoleState): string {
    const hosts = state.frame ? renderHostGrid(state.frame.hosts) : "";
    return (
        `<section class="status">${renderStatus(state)}</section>` +
        `<section class="policy-box">${renderPolicyIndicator(state)}</section>` +
        `<section class="returns-box">${renderReturns(state)}` +
        `${renderSparkline(state, 0)}${renderSparkline(state, 1)}</section>` +
        `<section class="grid-box">${hosts}</section>`
    );
}
